import json

import numpy as np
import pytest

from conftest import hexagon
from tunpd.errors import GenerationFailed, InvalidInput
from tunpd.synth import (
    KINDS, PLANAR_KINDS, LabeledSample, Reject, derive_seed, generate_corpus, generate_shape, label_sample,
    load_corpus, make_sample, mean_nn_distance, sample_diagram,
)


def test_shape_examples():
    pts, b, _ = generate_shape("circle", {"n": 200, "size": 1.0}, seed=1)
    assert b == 1 and pts.shape == (200, 2)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, rtol=1e-12)
    assert generate_shape("k_circles", {"k": 3}, seed=1)[1] == 3
    pts, b, _ = generate_shape("torus_3d", {"n": 2000, "size": 1.0, "tube": 0.35}, seed=1)
    assert b == 2 and pts.shape == (2000, 3)
    assert generate_shape("figure_eight", seed=2)[1] == 2
    assert generate_shape("sphere_3d", seed=2)[1] == 0


@pytest.mark.parametrize("kind", KINDS)
def test_every_kind_labels_beta1_points(kind):
    for seed in range(3):
        for conf in (False, True):
            s = make_sample(f"{kind}-{seed}", kind, {"noise_sigma": 0.01, "confounder": conf}, seed)
            assert int(s.labels.sum()) == s.beta1
            assert len(s.labels) == len(s.diagram)
            if kind in PLANAR_KINDS:
                assert np.all(s.cloud[:, 2] == 0)


def test_noise_and_determinism():
    a, _, _ = generate_shape("ellipse", {"noise_sigma": 0.02}, seed=5)
    b, _, _ = generate_shape("ellipse", {"noise_sigma": 0.02}, seed=5)
    c, _, _ = generate_shape("ellipse", {"noise_sigma": 0.0}, seed=5)
    assert a.tobytes() == b.tobytes()
    assert 0.005 < np.std(a - c) < 0.04


@pytest.mark.parametrize("params", [{"noise_sigma": -1}, {"n": 2}, {"size": 0}, {"k": 0}])
def test_invalid_params(params):
    kind = "k_circles" if "k" in params else "circle"
    with pytest.raises(InvalidInput):
        generate_shape(kind, params)
    with pytest.raises(InvalidInput):
        generate_shape("cube", {})


def test_filled_disk_labels_all_false():
    s = make_sample("d", "filled_disk", {"confounder": True}, 3)
    assert not s.labels.any() and len(s.diagram) > 0


def test_hexagon_cloud_labels_single_point():
    cloud = np.column_stack([hexagon(), np.zeros(6)])
    dgm = sample_diagram(cloud, "circle")
    np.testing.assert_allclose(dgm, [[0.5, 1.0]], atol=1e-9)
    assert list(label_sample(cloud, dgm, 1)) == [True]


def test_confounder_is_born_late_and_labeled_noise():
    hits = 0
    for seed in range(6):
        s = make_sample(f"c{seed}", "circle", {"confounder": True}, seed)
        tau = 3 * mean_nn_distance(s.cloud)
        pers = s.diagram[:, 1] - s.diagram[:, 0]
        late = s.diagram[:, 0] > tau
        assert late.any()
        top_late = np.nonzero(late)[0][np.argmax(pers[late])]
        assert not s.labels[top_late]
        hits += int(np.argmax(pers) == top_late)
    assert hits >= 5  # the ring is usually the most persistent point


def test_label_rejections():
    with pytest.raises(Reject):
        label_sample(np.zeros((3, 3)) + [[0, 0, 0], [1, 0, 0], [0, 1, 0]], np.zeros((0, 2)), 1)
    with pytest.raises(Reject, match="margin"):
        label_sample(np.column_stack([hexagon(), np.zeros(6)]), [[0.5, 1.0], [0.5, 0.9]], 1)


def test_persistent_rejection_names_entry(tmp_path, monkeypatch):
    import tunpd.synth as synth

    def always_reject(*a):
        raise Reject("never clean")

    monkeypatch.setattr(synth, "label_sample", always_reject)
    with pytest.raises(GenerationFailed, match="spec entry.*circle"):
        generate_corpus({"kinds": {"circle": 1}}, tmp_path)


def test_corpus_byte_identical(tmp_path):
    spec = {"circle": 2, "seed": 7}
    generate_corpus(spec, tmp_path / "a")
    generate_corpus(spec, tmp_path / "b")
    for name in ("corpus.jsonl", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert len(load_corpus(tmp_path / "a")) == 2


def test_manifest_bookkeeping(tmp_path):
    spec = {"kinds": {"circle": 5, "filled_disk": 5}, "confounder_rate": 0.3,
            "noise_levels": [0.0, 0.01], "split": {"train": 6, "val": 2, "test": 2}, "seed": 1}
    man = generate_corpus(spec, tmp_path)
    assert man["confounder_count"] == 3 and man["n_samples"] == 10
    assert man["split_counts"] == {"train": 6, "val": 2, "test": 2}
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk["confounder_count"] == sum(e["confounder"] for e in on_disk["samples"])
    test = load_corpus(tmp_path, "test")
    assert len(test) == 2 and all(s.meta["split"] == "test" for s in test)


def test_sample_json_roundtrip():
    s = make_sample("x", "annulus", {}, 0)
    back = LabeledSample.from_json(s.to_json())
    assert back.id == s.id and back.meta == s.meta
    assert back.cloud.tobytes() == s.cloud.tobytes()
    assert back.diagram.tobytes() == s.diagram.tobytes()
    assert np.array_equal(back.labels, s.labels)


def test_derive_seed():
    assert derive_seed(42, "a") == derive_seed(42, "a")
    assert derive_seed(42, "a") != derive_seed(42, "b")
    assert derive_seed(42, "a") != derive_seed(43, "a")
    assert 0 <= derive_seed(2 ** 40, "x") < 2 ** 63
