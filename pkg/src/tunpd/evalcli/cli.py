"""Command line entry point: ``tunpd <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 internal invariant violation.
Heavy imports happen inside the command functions so ``--threads`` can
take effect before numpy starts its thread pool.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

log = logging.getLogger("tunpd")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3


def _set_threads(n):
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


# ---------------------------------------------------------------------------
# input helpers

def _load_cloud(path):
    import numpy as np

    from ..errors import InvalidInput

    p = Path(path)
    if not p.exists():
        raise InvalidInput(f"input file {p} does not exist")
    if p.suffix == ".npy":
        arr = np.load(p)
    elif p.suffix == ".json":
        return _load_sample(p).cloud
    else:
        text = p.read_text().strip().splitlines()
        if text and any(c.isalpha() for c in text[0].replace("e", "").replace("E", "")):
            text = text[1:]
        try:
            arr = np.array([[float(v) for v in line.replace(";", ",").split(",")]
                            for line in text if line.strip()], dtype=np.float64)
        except ValueError as exc:
            raise InvalidInput(f"{p}: cannot parse coordinates ({exc})") from None
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise InvalidInput(f"{p}: expected n x 2 or n x 3 coordinates, got shape {arr.shape}")
    return arr


def _load_sample(path):
    from ..errors import InvalidInput
    from ..synth import LabeledSample

    try:
        text = Path(path).read_text()
        return LabeledSample.from_json(text.strip().splitlines()[0] if text.strip() else text)
    except (OSError, ValueError, KeyError) as exc:
        raise InvalidInput(f"{path}: not a sample file ({exc})") from None


def _load_diagram(path):
    """(k, 2) finite dimension-1 pairs from a diagram CSV or sample JSON."""
    import numpy as np

    from ..errors import InvalidInput
    from ..persistence import PersistenceDiagram

    p = Path(path)
    if not p.exists():
        raise InvalidInput(f"input file {p} does not exist")
    if p.suffix == ".json":
        return _load_sample(p).diagram
    pd = PersistenceDiagram.from_csv(p.read_text())
    d = pd.dim(1)
    return d if len(d) else np.zeros((0, 2))


def _config(args):
    from ..tun import TunConfig

    path = getattr(args, "config", None)
    cfg = TunConfig.from_file(path) if path else TunConfig.desk()
    if getattr(args, "ablation", None):
        cfg = cfg.ablation(args.ablation)
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    return cfg


def _emit(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# ---------------------------------------------------------------------------
# commands

def cmd_generate(args):
    from ..errors import InvalidInput
    from ..synth import DESK_SPEC, generate_corpus

    spec = DESK_SPEC
    if args.spec:
        try:
            spec = json.loads(Path(args.spec).read_text())
        except (OSError, ValueError) as exc:
            raise InvalidInput(f"cannot read spec {args.spec}: {exc}") from None
    manifest = generate_corpus(spec, args.out, args.seed)
    print(f"wrote {manifest['n_samples']} samples to {args.out} "
          f"(rejection rate {manifest['rejection_rate']:.3f})")


def cmd_pd(args):
    import numpy as np

    from ..complex import alpha_filtration_2d, rips_filtration
    from ..persistence import diagram

    cloud = _load_cloud(args.input)
    kind = args.filtration
    if kind == "auto":
        planar = cloud.shape[1] == 2 or np.all(cloud[:, 2] == 0)
        kind = "alpha" if planar else "rips"
    if kind == "alpha":
        fc = alpha_filtration_2d(cloud[:, :2])
    else:
        fc = rips_filtration(cloud, args.r_max) if args.r_max else rips_filtration(cloud)
    dg = diagram(fc)
    if not args.all_dims:
        from ..persistence import PersistenceDiagram

        keep = dg.points[:, 2] == 1
        dg = PersistenceDiagram(dg.points[keep], dg.essential[dg.essential[:, 1] == 1])
    _emit(dg.to_csv(), args.out)


def cmd_featurize(args):
    from ..synth import load_corpus
    from ..tun import featurize

    cfg = _config(args)
    samples = load_corpus(args.corpus, args.split)
    bundles = featurize(samples, cfg)
    with open(args.out, "w") as fh:
        for s, b in zip(samples, bundles):
            obj = json.loads(b.to_json())
            obj["id"] = s.id
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
    print(f"wrote {len(bundles)} bundles to {args.out}")


def cmd_train(args):
    from ..synth import load_corpus
    from ..tun import featurize, train

    cfg = _config(args)
    train_s = load_corpus(args.corpus, "train")
    val_s = load_corpus(args.corpus, "val")
    log_path = args.log or str(args.out) + ".log.csv"
    res = train(cfg, featurize(train_s, cfg), featurize(val_s, cfg), log_path=log_path,
                ckpt_path=args.out, max_epochs=args.max_epochs)
    print(f"best epoch {res.best_epoch} (val loss {res.best_val_loss:.6g}); "
          f"{len(res.log_rows)} epochs; checkpoint {args.out}; log {log_path}")


def cmd_evaluate(args):
    from ..errors import InvalidInput
    from ..synth import load_corpus
    from .evaluate import BaselineSpec, evaluate_baseline, evaluate_model
    from .metrics import write_report

    samples = load_corpus(args.corpus, args.split)
    if not samples:
        raise InvalidInput(f"split {args.split!r} of {args.corpus} is empty")
    if args.ckpt:
        ev = evaluate_model(args.ckpt, samples)
    elif args.method:
        spec = BaselineSpec(args.method, _parse_k(args.k), args.level, args.bootstrap,
                            0 if args.seed is None else args.seed)
        ev = evaluate_baseline(spec, samples, args.n_pd)
    else:
        raise InvalidInput("evaluate needs --ckpt or --method")
    _emit(write_report(ev.rows(args.dataset)), args.out)
    if args.per_sample:
        Path(args.per_sample).write_text(ev.per_sample_csv())


def _parse_k(k):
    return "beta1" if str(k) == "beta1" else int(k)


def cmd_baseline(args):
    import csv
    import io

    from ..baselines import run_baseline

    d = _load_diagram(args.input)
    cloud = None
    if args.method in ("cs", "confidence_set"):
        cloud = _load_cloud(args.cloud or args.input)
    k = _parse_k(args.k)
    if k == "beta1":
        k = _load_sample(args.input).beta1
    res = run_baseline(args.method, d, cloud, k=k, level=args.level, B=args.bootstrap,
                       seed=0 if args.seed is None else args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["birth", "death", "significant"])
    for (b, dd), lab in zip(d, res.labels):
        w.writerow([repr(float(b)), repr(float(dd)), int(lab)])
    _emit(buf.getvalue(), args.out)
    log.info("%s params %s", res.method, res.params)


def cmd_predict(args):
    import csv
    import io
    from types import SimpleNamespace

    import numpy as np

    from ..features import build_bundle
    from ..synth import derive_seed
    from ..tun import load_model, predict

    model, _ = load_model(args.ckpt)
    cfg = model.cfg
    if Path(args.input).suffix == ".json":
        s = _load_sample(args.input)
        sample = SimpleNamespace(cloud=s.cloud, diagram=s.diagram, labels=None)
        sid = s.id
    else:
        from ..errors import InvalidInput

        if not args.cloud:
            raise InvalidInput("predict from a diagram CSV needs --cloud")
        sample = SimpleNamespace(cloud=_load_cloud(args.cloud), diagram=_load_diagram(args.input),
                                 labels=None)
        sid = Path(args.input).stem
    bundle = build_bundle(sample, cfg.N_pd, cfg.N_pc, cfg.aux_groups,
                          seed=derive_seed(cfg.seed, f"{sid}/cap"))
    pred = predict(model, bundle)
    order = np.argsort(pred.source_index, kind="stable")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["birth", "death", "prob_significant", "label_pred"])
    for j in order:
        b, dd = sample.diagram[pred.source_index[j]]
        w.writerow([repr(float(b)), repr(float(dd)), repr(float(pred.prob[j])), int(pred.label[j])])
    _emit(buf.getvalue(), args.out)


def cmd_render(args):
    import csv

    import numpy as np

    from .render import render_pd

    labels = None
    p = Path(args.input)
    if p.suffix == ".json":
        s = _load_sample(p)
        d, labels = s.diagram, s.labels
    else:
        rows = list(csv.DictReader(p.open()))
        d = np.array([[float(r["birth"]), float(r["death"])] for r in rows
                      if r.get("death", "inf") != "inf"]).reshape(-1, 2)
        for col in ("label_pred", "significant"):
            if rows and col in rows[0]:
                labels = np.array([int(r[col]) for r in rows if r.get("death") != "inf"], dtype=bool)
                break
    if args.pred:
        rows = list(csv.DictReader(open(args.pred)))
        d = np.array([[float(r["birth"]), float(r["death"])] for r in rows]).reshape(-1, 2)
        labels = np.array([int(r["label_pred"]) for r in rows], dtype=bool)
    render_pd(d, labels, args.out, args.title or "")


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="global random seed")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="BLAS/OpenMP thread count")
    common.add_argument("--config", default=argparse.SUPPRESS, help="model config (JSON)")
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)

    ap = argparse.ArgumentParser(prog="tunpd", description=__doc__.splitlines()[0], parents=[common])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a synthetic labelled corpus")
    g.add_argument("--out", required=True)
    g.add_argument("--spec", help="corpus spec JSON (default: desk spec)")
    g.set_defaults(func=cmd_generate)

    p = sub.add_parser("pd", parents=[common], help="point cloud -> persistence diagram CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--filtration", choices=("auto", "alpha", "rips"), default="auto")
    p.add_argument("--r-max", type=float, default=None)
    p.add_argument("--all-dims", action="store_true", help="also write dimension-0 pairs")
    p.add_argument("--out")
    p.set_defaults(func=cmd_pd)

    f = sub.add_parser("featurize", parents=[common], help="corpus -> model input bundles (JSONL)")
    f.add_argument("--corpus", required=True)
    f.add_argument("--split", default=None)
    f.add_argument("--ablation", type=int, default=0)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_featurize)

    t = sub.add_parser("train", parents=[common], help="train the classifier")
    t.add_argument("--corpus", required=True)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--log", help="per-epoch CSV log (default: <out>.log.csv)")
    t.add_argument("--ablation", type=int, default=0, choices=range(7))
    t.add_argument("--max-epochs", type=int, default=None)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", parents=[common], help="pooled metrics on a corpus split")
    e.add_argument("--corpus", required=True)
    e.add_argument("--split", default="test")
    e.add_argument("--ckpt")
    e.add_argument("--method", choices=("topk", "2means", "cs"))
    e.add_argument("--k", default="1", help="integer, or 'beta1' for the true loop count")
    e.add_argument("--level", type=float, default=0.5)
    e.add_argument("--bootstrap", type=int, default=100)
    e.add_argument("--n-pd", type=int, default=32, help="diagram rows scored per sample")
    e.add_argument("--dataset", default="all")
    e.add_argument("--out")
    e.add_argument("--per-sample")
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("baseline", parents=[common], help="label one diagram with a baseline")
    b.add_argument("--method", required=True, choices=("topk", "2means", "cs"))
    b.add_argument("--k", default="1")
    b.add_argument("--level", type=float, default=0.5)
    b.add_argument("--bootstrap", type=int, default=100)
    b.add_argument("--input", required=True, help="sample JSON or diagram CSV")
    b.add_argument("--cloud", help="point cloud for cs when --input is a diagram CSV")
    b.add_argument("--out")
    b.set_defaults(func=cmd_baseline)

    r = sub.add_parser("predict", parents=[common], help="per-point predictions from a checkpoint")
    r.add_argument("--ckpt", required=True)
    r.add_argument("--input", required=True, help="sample JSON or diagram CSV")
    r.add_argument("--cloud")
    r.add_argument("--out")
    r.set_defaults(func=cmd_predict)

    v = sub.add_parser("render", parents=[common], help="SVG scatter of a diagram")
    v.add_argument("--input", required=True, help="sample JSON, diagram CSV or labelled CSV")
    v.add_argument("--pred", help="predict output to colour by")
    v.add_argument("--title")
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    for name, default in (("seed", None), ("threads", None), ("config", None), ("verbose", 0)):
        if not hasattr(args, name):
            setattr(args, name, default)
    _set_threads(args.threads)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else
                        logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    from ..errors import InvalidInput, TunError

    try:
        args.func(args)
    except TunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (InvalidInput, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # anything else is a bug
        if args.verbose:
            raise
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
