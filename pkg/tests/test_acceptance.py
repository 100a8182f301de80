"""End-to-end acceptance checks, one PASS/FAIL line each.

The expensive pieces (desk corpus, full training runs) are built once per
session. Run directly with ``python tests/test_acceptance.py`` or through pytest;
either way the summary lines are printed at the end.
"""
import csv
import math
import time
from pathlib import Path

import numpy as np
import pytest

import conftest
from conftest import hexagon, square

DATA = Path(__file__).parent / "data"
SHORT_EPOCHS = 3       # epochs for the train-twice determinism run
ABLATION_EPOCHS = 5    # epochs for ablations 2-6, which only need to build and train


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def cli(*argv):
    from tunpd.evalcli.cli import main

    code = main([str(a) for a in argv])
    assert code == 0, f"tunpd {' '.join(map(str, argv))} exited {code}"


# -- 1 ------------------------------------------------------------------------

def test_criterion_1_metric_oracle():
    from tunpd.evalcli.metrics import ConfusionCounts, metrics

    t0 = time.perf_counter()
    rows = list(csv.DictReader(open(DATA / "reference_counts.csv")))
    cols = ("f1", "acc", "pre", "rec")
    bad = []
    swapped = 0
    for r in rows:
        got = metrics(ConfusionCounts(*(int(r[k]) for k in ("tp", "tn", "fp", "fn")))).rounded(4)
        want = tuple(float(r[k]) for k in cols)
        diff = [c for c, g, w in zip(cols, got, want) if not (g == w or (math.isnan(g) and math.isnan(w)))]
        if diff:
            bad.append(f"{r['method']}/{r['dataset']}:{'+'.join(diff)}")
            swapped += got[2] == want[3] and got[3] == want[2]
    dt = time.perf_counter() - t0
    detail = f"{len(rows) - len(bad)}/{len(rows)} rows reproduce in {dt:.3f}s"
    if bad:
        detail += f"; {swapped} mismatching rows have precision and recall swapped; " + " ".join(bad)
    report(1, not bad and dt < 1.0, detail)


# -- 2 ------------------------------------------------------------------------

def _oracle_discrepancies(fc, rng, n_pairs=20):
    from tunpd.persistence import betti_bruteforce, diagram
    from test_persistence import alive, value_boundaries

    _, vals, _ = fc.sorted_arrays()
    dgm = diagram(fc)
    cuts = value_boundaries(fc)
    bad = 0
    for _ in range(n_pairs):
        i, j = sorted(rng.choice(cuts, 2))
        bi = vals[i - 1] if i else -np.inf
        bj = vals[j - 1] if j else -np.inf
        bad += alive(dgm, bi, bj) != betti_bruteforce(fc, i, j)
    return bad


def test_criterion_2_persistence():
    from tunpd.complex import alpha_filtration_2d, rips_filtration
    from tunpd.persistence import diagram

    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    bad = 0
    for c in range(500):
        if c % 2 == 0:
            fc = alpha_filtration_2d(rng.normal(size=(int(rng.integers(4, 13)), 2)))
        else:
            # a 12-point Rips 2-skeleton can exceed the oracle's simplex budget
            fc = rips_filtration(rng.normal(size=(int(rng.integers(3, 11)), 3)))
        bad += _oracle_discrepancies(fc, rng)
    sq = diagram(alpha_filtration_2d(square())).dim(1)
    hx = diagram(alpha_filtration_2d(hexagon())).dim(1)
    analytic = (len(sq) == 1 and np.allclose(sq[0], [0.5, math.sqrt(0.5)], rtol=0, atol=1e-9)
                and len(hx) == 1 and np.allclose(hx[0], [0.5, 1.0], rtol=0, atol=1e-9))
    dt = time.perf_counter() - t0
    report(2, bad == 0 and analytic and dt < 120,
           f"{bad} discrepancies over 500 clouds x 20 prefix pairs; analytic cases "
           f"{'match' if analytic else 'differ'}; {dt:.1f}s")


# -- 3 ------------------------------------------------------------------------

def test_criterion_3_gradients():
    from gradcases import check_model, check_op, op_cases

    t0 = time.perf_counter()
    per_op = {name: check_op(name, 50) for name in op_cases()}
    model_err = max(check_model(50, seed=s)[0] for s in (0, 1))
    worst_op = max(per_op, key=per_op.get)
    dt = time.perf_counter() - t0
    ok = max(per_op.values()) < 1e-4 and model_err < 1e-4 and dt < 300
    report(3, ok, f"{len(per_op)} ops, worst {worst_op} {per_op[worst_op]:.1e}; "
                  f"desk model {model_err:.1e}; {dt:.1f}s")


# -- 4 ------------------------------------------------------------------------

def test_criterion_4_loss():
    from tunpd.tun import cross_entropy, focal_loss

    rng = np.random.default_rng(4)
    worst = 0.0
    pad_exact = True
    for _ in range(100):
        b, n = int(rng.integers(1, 6)), int(rng.integers(1, 20))
        logits = rng.normal(scale=3, size=(b, n, 2))
        labels = rng.random((b, n)) < 0.3
        mask = rng.random((b, n)) < 0.7
        mask[0, 0] = True
        got = float(focal_loss(logits, labels, mask, alpha=1, gamma=0, w0=1, w1=1).data)
        worst = max(worst, abs(got - cross_entropy(logits, labels, mask)))
        base = focal_loss(logits, labels, mask).data.tobytes()
        junk = logits.copy()
        junk[~mask] = rng.normal(scale=1e3, size=(int((~mask).sum()), 2))
        flipped = np.where(mask, labels, ~labels)
        extra = int(rng.integers(1, 5))
        wide = np.concatenate([junk, rng.normal(size=(b, extra, 2))], axis=1)
        wl = np.concatenate([flipped, np.ones((b, extra), bool)], axis=1)
        wm = np.concatenate([mask, np.zeros((b, extra), bool)], axis=1)
        pad_exact &= focal_loss(wide, wl, wm).data.tobytes() == base
    report(4, worst <= 1e-12 and pad_exact,
           f"max |focal - CE| = {worst:.1e} over 100 batches; padding "
           f"{'exact' if pad_exact else 'changes the loss'}")


# -- desk corpus and trained models -------------------------------------------

@pytest.fixture(scope="session")
def desk(tmp_path_factory):
    from tunpd.synth import load_corpus
    from tunpd.tun import TunConfig, featurize, load_model, train

    root = tmp_path_factory.mktemp("desk")
    out = {"root": root}
    t0 = time.perf_counter()
    cli("generate", "--out", root / "a")
    out["generate_s"] = time.perf_counter() - t0
    cli("generate", "--out", root / "b")
    out["corpus"] = root / "a"

    t0 = time.perf_counter()
    cli("train", "--corpus", root / "a", "--out", root / "tun.ckpt")
    out["train_s"] = time.perf_counter() - t0
    out["model"], out["model_meta"] = load_model(root / "tun.ckpt")
    out["log"] = (root / "tun.ckpt.log.csv").read_text()

    samples = {s: load_corpus(root / "a", s) for s in ("train", "val", "test")}
    out["samples"] = samples
    base = TunConfig.desk()
    out["ablations"] = {}
    for k in range(1, 7):
        cfg = base.ablation(k)
        t0 = time.perf_counter()
        res = train(cfg, featurize(samples["train"], cfg), featurize(samples["val"], cfg),
                    max_epochs=None if k == 1 else ABLATION_EPOCHS)
        out["ablations"][k] = (cfg, res, time.perf_counter() - t0)
    return out


# -- 5 ------------------------------------------------------------------------

def test_criterion_5_learning(desk):
    from tunpd.evalcli.evaluate import BaselineSpec, evaluate_baseline, evaluate_model

    test = desk["samples"]["test"]
    tun = evaluate_model(desk["model"], test).report
    two = evaluate_baseline(BaselineSpec("2means"), test).report
    top = evaluate_baseline(BaselineSpec("topk", k=1), test).report
    conf = [s for s in test if s.meta["confounder"]]
    tun_c = evaluate_model(desk["model"], conf).report.f1
    two_c = evaluate_baseline(BaselineSpec("2means"), conf).report.f1
    n = sum(len(v) for v in desk["samples"].values())
    checks = {
        "TUN >= 0.95": tun.f1 >= 0.95,
        "2means <= 0.90": two.f1 <= 0.90,
        "topk(k=1) < 2means": top.f1 < two.f1,
        "training <= 15 min": desk["train_s"] <= 900,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = (f"{n} samples; test F1 TUN {tun.f1:.4f}, 2means {two.f1:.4f}, topk(k=1) {top.f1:.4f}; "
              f"confounder subset TUN {tun_c:.4f} vs 2means {two_c:.4f}; "
              f"generate {desk['generate_s']:.0f}s, train {desk['train_s']:.0f}s")
    if failed:
        detail += "; unmet: " + ", ".join(failed)
    report(5, not failed, detail)


# -- 6 ------------------------------------------------------------------------

def test_criterion_6_ablations(desk):
    from tunpd.evalcli.evaluate import evaluate_model

    test = desk["samples"]["test"]
    F = desk["model"].cfg.F
    expect = {1: F // 2, 2: F, 3: 3 * F // 2, 4: 3 * F // 2, 5: 3 * F // 2, 6: 3 * F // 2}
    dims, trained = {}, True
    for k, (cfg, res, _) in desk["ablations"].items():
        dims[k] = res.model.fusion_dim
        trained &= len(res.log_rows) > 0 and all(math.isfinite(r["train_loss"]) for r in res.log_rows)
    d_law = all(dims[k] == expect[k] == desk["ablations"][k][0].fusion_dim for k in dims)
    full = evaluate_model(desk["model"], test).report.f1
    abl1 = evaluate_model(desk["ablations"][1][1].model, test).report.f1
    ok = d_law and trained and abl1 >= 0.85 and abl1 < full
    report(6, ok, f"fusion widths {[dims[k] for k in sorted(dims)]} (F={F}); all 6 trained "
                  f"{'cleanly' if trained else 'with non-finite loss'}; ablation 1 F1 {abl1:.4f} "
                  f"vs full {full:.4f}")


# -- 7 ------------------------------------------------------------------------

def test_criterion_7_determinism(desk):
    root = desk["root"]
    same = {}
    a, b = root / "a", root / "b"
    same["manifest"] = (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
    same["corpus"] = (a / "corpus.jsonl").read_bytes() == (b / "corpus.jsonl").read_bytes()
    for tag in "xy":
        cli("train", "--corpus", a, "--out", root / f"short_{tag}.ckpt", "--max-epochs", SHORT_EPOCHS,
            "--seed", 7)
    same["train log"] = (root / "short_x.ckpt.log.csv").read_bytes() == \
        (root / "short_y.ckpt.log.csv").read_bytes()
    same["checkpoint"] = (root / "short_x.ckpt").read_bytes() == (root / "short_y.ckpt").read_bytes()
    for tag in "xy":
        cli("evaluate", "--corpus", a, "--ckpt", root / "tun.ckpt", "--out", root / f"rep_{tag}.csv",
            "--per-sample", root / f"per_{tag}.csv")
        cli("evaluate", "--corpus", a, "--method", "cs", "--out", root / f"cs_{tag}.csv", "--seed", 3)
    for name in ("rep", "per", "cs"):
        same[f"{name} report"] = (root / f"{name}_x.csv").read_bytes() == (root / f"{name}_y.csv").read_bytes()
    diff = [k for k, v in same.items() if not v]
    report(7, not diff, f"{len(same) - len(diff)}/{len(same)} artefacts byte-identical across reruns"
                        + (f"; differing: {', '.join(diff)}" if diff else ""))


# -- 8 ------------------------------------------------------------------------

def test_criterion_8_feature_laws():
    from tunpd.features import aux_vector
    from test_features import LINEAR, random_sample

    rng = np.random.default_rng(8)
    failures = 0
    worst = 0.0
    for _ in range(200):
        cloud, dgm = random_sample(rng)
        s = float(np.exp(rng.uniform(np.log(1e-3), np.log(1e3))))
        a = aux_vector(cloud, dgm)
        b = aux_vector(cloud * s, dgm * s)
        want = a.copy()
        want[LINEAR] *= s
        rel = np.abs(b - want) / np.maximum(np.abs(want), 1e-300)
        rel[want == b] = 0.0
        worst = max(worst, float(rel.max()))
        perm = aux_vector(cloud[rng.permutation(len(cloud))], dgm[rng.permutation(len(dgm))])
        failures += rel.max() > 1e-9 or not np.allclose(perm, a, rtol=1e-9, atol=0)
    report(8, failures == 0, f"{failures} failures over 200 clouds; worst relative error {worst:.1e}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
