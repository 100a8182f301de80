import json
import math

import numpy as np
import pytest

from conftest import square
from tunpd.errors import InvalidInput
from tunpd.features import (
    AUX_GROUPS, AUX_NAMES, FeatureBundle, aux_vector, build_bundle, cap_cloud, cloud_statistics,
    knn_mean_distances, log_ratio, noise_uniformity, pd_point_features, pd_statistics,
)
from tunpd.synth import LabeledSample

# entries of the 14-vector that scale linearly with the cloud; counts, pca_ratio
# and density_cv must not move at all
LINEAR = [1, 2, 3, 4, 6, 7, 8, 9, 10, 11]


def random_sample(rng, n=None, planar=None):
    from tunpd.complex import alpha_filtration_2d
    from tunpd.persistence import diagram

    n = n or int(rng.integers(20, 80))
    planar = rng.random() < 0.5 if planar is None else planar
    xy = rng.normal(size=(n, 2)) * rng.uniform(0.5, 2, 2)
    cloud = np.column_stack([xy, np.zeros(n) if planar else rng.normal(scale=0.3, size=n)])
    dgm = diagram(alpha_filtration_2d(xy)).dim(1)
    return cloud, dgm


def scale_law_holds(rng, s):
    cloud, dgm = random_sample(rng)
    a = aux_vector(cloud, dgm)
    b = aux_vector(cloud * s, dgm * s)
    want = a.copy()
    want[LINEAR] *= s
    np.testing.assert_allclose(b, want, rtol=1e-9, atol=1e-300)


# -- per-point features --------------------------------------------------------

def test_point_features_example():
    f, m, src = pd_point_features([[0.5, 1.0]], 4)
    np.testing.assert_allclose(f[0], [0.5, 1.0, 0.5, math.log(2)], rtol=1e-12)
    assert np.all(f[1:] == 0) and list(m) == [1, 0, 0, 0] and list(src) == [0, -1, -1, -1]


def test_point_features_empty_and_clamp():
    f, m, _ = pd_point_features(np.zeros((0, 2)), 3)
    assert np.all(f == 0) and not m.any()
    f, _, _ = pd_point_features([[0.0, 0.3]], 1)
    assert f[0, 3] == 20.0
    with pytest.raises(InvalidInput):
        pd_point_features([[0, 1]], 0)


def test_truncation_keeps_most_persistent_with_birth_tiebreak():
    d = np.array([[0.2, 0.3], [0.1, 0.9], [0.0, 0.1], [0.5, 0.6], [0.3, 1.1]])
    f, m, src = pd_point_features(d, 3)
    assert list(src) == [1, 4, 2]  # persistences .8, .8, then .1 with smallest birth
    assert np.all(f[:, 2] == f[:, 1] - f[:, 0])


def test_log_ratio_monotone():
    b = np.array([0.1, 0.1, 0.2])
    d = np.array([0.5, 0.6, 0.6])
    r = log_ratio(b, d)
    assert r[1] > r[0] and r[2] < r[1]


# -- statistics --------------------------------------------------------------

@pytest.mark.parametrize("dgm,want", [
    ([[0.5, 1.0]], [1, 0.5, 0, 0.5, 0.5]),
    (np.zeros((0, 2)), [0, 0, 0, 0, 0]),
    # persistences {1, 3}: mean 2, population std 1, max 3
    ([[0, 1], [0, 3]], [2, 2.0, 1.0, 3.0, 0.0]),
])
def test_pd_statistics(dgm, want):
    np.testing.assert_allclose(pd_statistics(dgm), want, atol=1e-15)


def test_cloud_statistics_square():
    got = cloud_statistics(square())
    want = [4, 1 / 3, (2 + math.sqrt(2)) / 4, 1, 1, 0]
    np.testing.assert_allclose(got, want, rtol=1e-12)
    np.testing.assert_array_equal(cloud_statistics([[0.0, 0.0, 0.0]]), [1, 0, 0, 0, 0, 0])
    with pytest.raises(InvalidInput):
        cloud_statistics(np.zeros((0, 3)))


def test_noise_uniformity_examples():
    knn_std, pca, cv = noise_uniformity(square())
    assert knn_std == pytest.approx(0, abs=1e-15) and cv == pytest.approx(0, abs=1e-15)
    assert pca == 0  # planar cloud lifted to z = 0
    np.testing.assert_allclose(noise_uniformity([[0, 0], [1, 0]]), [0, 0, 0], atol=1e-15)
    with pytest.raises(InvalidInput):
        noise_uniformity([[1.0, 1.0]])


def test_knn_matches_scipy(rng):
    from scipy.spatial import cKDTree

    pts = rng.normal(size=(700, 3))
    d, _ = cKDTree(pts).query(pts, k=11)
    np.testing.assert_allclose(knn_mean_distances(pts, 10), d[:, 1:].mean(axis=1), rtol=1e-12)


def test_aux_layout_and_toggles(rng):
    cloud, dgm = random_sample(rng)
    assert len(AUX_NAMES) == 14
    assert len(aux_vector(cloud, dgm)) == 14
    assert len(aux_vector(cloud, dgm, ())) == 0
    assert len(aux_vector(cloud, dgm, ("pd_stats", "noise"))) == 8
    full = aux_vector(cloud, dgm)
    np.testing.assert_array_equal(aux_vector(cloud, dgm, ("bbox",)), full[8:11])
    with pytest.raises(InvalidInput):
        aux_vector(cloud, dgm, ("colour",))
    assert set(AUX_GROUPS) == {"pd_stats", "pc_stats", "bbox", "noise"}


# -- laws --------------------------------------------------------------------

@pytest.mark.parametrize("s", [1e-3, 0.5, 3.0, 250.0])
def test_scale_law(s):
    rng = np.random.default_rng(int(s * 1000))
    for _ in range(10):
        scale_law_holds(rng, s)


def test_permutation_invariance(rng):
    cloud, dgm = random_sample(rng, 60)
    a = aux_vector(cloud, dgm)
    b = aux_vector(cloud[rng.permutation(len(cloud))], dgm[rng.permutation(len(dgm))])
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)
    fa, ma, _ = pd_point_features(dgm, 16)
    fb, mb, _ = pd_point_features(dgm[rng.permutation(len(dgm))], 16)
    # the deterministic ordering only differs among rows with identical (pers, birth)
    np.testing.assert_array_equal(fa, fb)
    np.testing.assert_array_equal(ma, mb)


# -- caps and bundles --------------------------------------------------------

def test_cap_cloud_cycles_short_clouds(rng):
    pts = rng.normal(size=(10, 3))
    out = cap_cloud(pts, 25, rng)
    assert out.shape == (25, 3)
    idx = [int(np.nonzero((pts == r).all(axis=1))[0][0]) for r in out]
    assert np.all(np.bincount(idx, minlength=10) >= 2)


def test_cap_cloud_subsamples_without_replacement(rng):
    pts = rng.normal(size=(600, 2))
    out = cap_cloud(pts, 512, rng)
    assert out.shape == (512, 3)
    assert len(np.unique(out, axis=0)) == 512
    assert cap_cloud(pts[:512], 512, rng).shape == (512, 3)


def test_build_bundle_mask_and_labels(rng):
    cloud, dgm = random_sample(rng, 40, planar=True)
    labels = np.zeros(len(dgm), dtype=bool)
    labels[int(np.argmax(dgm[:, 1] - dgm[:, 0]))] = True
    s = LabeledSample("x", cloud, dgm, labels, {"beta1": 1})
    b = build_bundle(s, 64, 30)
    assert b.pd_feats.shape == (64, 4) and b.cloud.shape == (30, 3) and b.aux.shape == (14,)
    assert b.labels[0] and b.labels.sum() == 1
    assert np.all(b.pd_feats[~b.mask] == 0) and not b.labels[~b.mask].any()
    assert np.all(np.isfinite(b.pd_feats)) and np.all(np.isfinite(b.aux))
    # statistics come from the uncapped inputs
    np.testing.assert_array_equal(b.aux, aux_vector(cloud, dgm))
    assert build_bundle(s, 4, 30, aux_groups=()).aux.shape == (0,)


def test_bundle_json_roundtrip(rng):
    cloud, dgm = random_sample(rng, 30)
    s = LabeledSample("x", cloud, dgm, np.zeros(len(dgm), dtype=bool), {"beta1": 0})
    b = build_bundle(s, 8, 16, seed=3)
    back = FeatureBundle.from_json(b.to_json())
    for key in ("pd_feats", "mask", "aux", "cloud", "labels"):
        np.testing.assert_array_equal(getattr(back, key), getattr(b, key))
    assert set(json.loads(b.to_json())) == {"pd_feats", "mask", "aux", "cloud", "labels"}
