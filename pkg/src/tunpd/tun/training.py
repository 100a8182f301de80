"""Featurisation of labelled samples, the training loop and inference."""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import nn
from ..errors import IncompatibleCheckpoint, InvalidInput, NonFiniteGradient, ShapeError
from ..features import FeatureBundle, build_bundle
from ..synth import derive_seed
from .config import TunConfig
from .loss import focal_loss
from .model import Batch, TunModel, collate

log = logging.getLogger(__name__)

CHECKPOINT_KIND = "tun"
LOG_COLUMNS = ("epoch", "lr", "train_loss", "val_loss", "val_f1", "best")


def featurize(samples, cfg: TunConfig) -> list[FeatureBundle]:
    """One bundle per sample; cloud capping is seeded from the sample id."""
    return [
        build_bundle(s, cfg.N_pd, cfg.N_pc, cfg.aux_groups, seed=derive_seed(cfg.seed, f"{s.id}/cap"))
        for s in samples
    ]


def _f1(tp, fp, fn) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else float("nan")


@dataclass
class TrainResult:
    model: TunModel
    log_rows: list
    best_epoch: int
    best_val_loss: float
    stopped_early: bool
    seconds: float

    def log_csv(self) -> str:
        return format_log(self.log_rows)


def format_log(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    for r in rows:
        w.writerow([r["epoch"], repr(r["lr"]), repr(r["train_loss"]), repr(r["val_loss"]),
                    repr(r["val_f1"]), int(r["best"])])
    return buf.getvalue()


def batch_loss(model: TunModel, batch: Batch, ctx: nn.Context) -> nn.Tensor:
    return focal_loss(model.forward(batch, ctx), batch.labels, batch.mask, model.cfg)


def evaluate_loss(model: TunModel, bundles, batch_size: int):
    """Mean per-row focal loss and pooled F1 in eval mode."""
    total, rows = 0.0, 0
    tp = fp = fn = 0
    for s in range(0, len(bundles), batch_size):
        batch = collate(bundles[s:s + batch_size])
        if not batch.mask.any():
            continue
        logits = model.forward(batch, nn.Context(training=False))
        n_valid = int(batch.mask.sum())
        total += float(focal_loss(logits, batch.labels, batch.mask, model.cfg).data) * n_valid
        rows += n_valid
        pred = logits.data[..., 1] > logits.data[..., 0]
        m, y = batch.mask, batch.labels
        tp += int((pred & y & m).sum())
        fp += int((pred & ~y & m).sum())
        fn += int((~pred & y & m).sum())
    return (total / rows if rows else float("nan")), _f1(tp, fp, fn)


def train(cfg: TunConfig, train_bundles, val_bundles, log_path=None, ckpt_path=None,
          max_epochs: int | None = None, progress=None) -> TrainResult:
    """AdamW + cosine schedule with early stopping on validation loss.

    The returned model carries the weights of the best validation epoch.
    """
    if not train_bundles or not val_bundles:
        raise InvalidInput("training needs non-empty train and validation splits")
    if any(b.labels is None for b in list(train_bundles) + list(val_bundles)):
        raise InvalidInput("training bundles must carry labels")
    epochs = cfg.max_epochs if max_epochs is None else max_epochs
    model = TunModel(cfg)
    store = model.store
    n = len(train_bundles)
    per_epoch = -(-n // cfg.batch_size)
    total_steps = epochs * per_epoch

    t0 = time.perf_counter()
    rows = []
    best = (float("inf"), -1, None)
    since_best = 0
    stopped = False
    for epoch in range(1, epochs + 1):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        losses, weights = [], []
        lr = cfg.lr_max
        for bi in range(per_epoch):
            idx = order[bi * cfg.batch_size:(bi + 1) * cfg.batch_size]
            batch = collate([train_bundles[i] for i in idx])
            if not batch.mask.any():
                continue
            lr = nn.cosine_lr(store.step, total_steps, cfg.lr_max, cfg.lr_min)
            ctx = nn.Context(training=True, step=store.step, seed=cfg.seed)
            store.zero_grad()
            loss = batch_loss(model, batch, ctx)
            loss.backward()
            try:
                nn.adamw_step(store, lr, cfg.weight_decay, clip=cfg.clip)
            except NonFiniteGradient as exc:
                raise NonFiniteGradient(f"epoch {epoch}, step {store.step}: {exc}") from None
            losses.append(float(loss.data))
            weights.append(int(batch.mask.sum()))
        train_loss = float(np.average(losses, weights=weights)) if losses else float("nan")
        val_loss, val_f1 = evaluate_loss(model, val_bundles, cfg.batch_size)
        improved = val_loss < best[0]
        if improved:
            best = (val_loss, epoch, _snapshot(store))
            since_best = 0
        else:
            since_best += 1
        rows.append({"epoch": epoch, "lr": lr, "train_loss": train_loss, "val_loss": val_loss,
                     "val_f1": val_f1, "best": improved})
        log.info("epoch %d lr %.2e train %.5f val %.5f f1 %.4f", epoch, lr, train_loss, val_loss, val_f1)
        if progress is not None:
            progress(rows[-1])
        if since_best >= cfg.patience:
            stopped = True
            break

    _restore(store, best[2])
    result = TrainResult(model, rows, best[1], best[0], stopped, time.perf_counter() - t0)
    if log_path is not None:
        Path(log_path).write_text(result.log_csv())
    if ckpt_path is not None:
        save_model(ckpt_path, model, {"best_epoch": best[1], "best_val_loss": best[0],
                                      "epochs_run": len(rows)})
    return result


def _snapshot(store: nn.ParamStore):
    return {k: v.copy() for k, v in store.state_arrays().items()}, store.step


def _restore(store: nn.ParamStore, snap):
    if snap is None:
        return
    arrays, step = snap
    store.load_arrays(arrays)
    store.step = step


# ---------------------------------------------------------------------------
# checkpoints

def save_model(path, model: TunModel, extra: dict | None = None):
    store = model.store
    meta = {
        "kind": CHECKPOINT_KIND,
        "config": model.cfg.to_dict(),
        "optimizer": {"step": store.step},
        "rng": {"seed": store.rng_seed, "state": store.rng.bit_generator.state},
        "train": extra or {},
    }
    nn.save_checkpoint(path, store.state_arrays(), meta)


def load_model(path) -> tuple[TunModel, dict]:
    arrays, meta = nn.load_checkpoint(path)
    if meta.get("kind") != CHECKPOINT_KIND:
        raise IncompatibleCheckpoint(f"{path}: not a classifier checkpoint")
    try:
        cfg = TunConfig.from_dict(meta["config"])
    except (KeyError, InvalidInput, TypeError) as exc:
        raise IncompatibleCheckpoint(f"{path}: bad config ({exc})") from None
    model = TunModel(cfg)
    model.store.load_arrays(arrays)
    model.store.step = int(meta.get("optimizer", {}).get("step", 0))
    if "rng" in meta:
        model.store.rng.bit_generator.state = meta["rng"]["state"]
    return model, meta


# ---------------------------------------------------------------------------
# inference

@dataclass
class Prediction:
    rows: np.ndarray  # bundle rows that were valid
    prob: np.ndarray  # probability of "significant" per valid row
    label: np.ndarray  # bool per valid row
    source_index: np.ndarray | None = None  # matching rows of the input diagram

    def __len__(self):
        return len(self.rows)


def predict(model, bundle: FeatureBundle) -> Prediction:
    """Argmax labels for the valid rows of one bundle; padding is never reported."""
    if isinstance(model, (str, Path)):
        model, _ = load_model(model)
    cfg = model.cfg
    if len(bundle.mask) != cfg.N_pd:
        raise ShapeError(f"bundle has {len(bundle.mask)} diagram rows, model expects {cfg.N_pd}")
    rows = np.nonzero(bundle.mask)[0]
    if len(rows) == 0:
        return Prediction(rows, np.zeros(0), np.zeros(0, dtype=bool),
                          None if bundle.source_index is None else np.zeros(0, dtype=np.int64))
    probs = model.probabilities(collate([bundle]))[0]
    logits_pick = probs[rows, 1] > probs[rows, 0]
    src = None if bundle.source_index is None else bundle.source_index[rows]
    return Prediction(rows, probs[rows, 1], logits_pick, src)


def predict_batch(model: TunModel, bundles, batch_size: int = 32) -> list[np.ndarray]:
    """Boolean predictions over all N_pd rows of each bundle (pads are False)."""
    out = []
    for s in range(0, len(bundles), batch_size):
        chunk = bundles[s:s + batch_size]
        logits = model.forward(collate(chunk), nn.Context(training=False)).data
        pred = (logits[..., 1] > logits[..., 0]) & np.stack([b.mask for b in chunk])
        out.extend(pred)
    return out
