import math

import numpy as np
import pytest

from gradcases import check_op, op_cases
from tunpd import nn
from tunpd.errors import IncompatibleCheckpoint, InvalidInput, NonFiniteGradient, ShapeError
from tunpd.nn.checkpoint import MAGIC


@pytest.mark.parametrize("name", list(op_cases()))
def test_op_gradients(name):
    assert check_op(name) < 1e-6


# -- examples ----------------------------------------------------------------

def test_relu_backward():
    x = nn.Tensor(np.array([-1.0, 2.0]), requires_grad=True)
    nn.relu(x).backward(np.array([5.0, 7.0]))
    np.testing.assert_array_equal(x.grad, [0.0, 7.0])


def test_softmax_examples():
    np.testing.assert_array_equal(nn.softmax(np.zeros(2)).data, [0.5, 0.5])
    out = nn.softmax(np.array([[1.0, 2.0, 3.0]]), mask=np.array([[True, False, True]])).data
    assert out[0, 1] == 0 and out.sum() == pytest.approx(1.0)
    assert np.all(nn.softmax(np.ones((1, 3)), mask=np.zeros((1, 3), bool)).data == 0)


def test_attention_single_key_copies_value_row(rng):
    x = rng.normal(size=(1, 4, 8))
    ps = [rng.normal(size=s) for s in [(8, 8), (8,)] * 4]
    mask = np.array([[False, False, True, False]])
    # project the value row manually; the output for every query is that row
    v = x[0, 2] @ ps[4] + ps[5]
    want = v @ ps[6] + ps[7]
    y = nn.multihead_attention(x, *ps, heads=2, mask=mask).data
    np.testing.assert_allclose(y[0], np.tile(want, (4, 1)), rtol=1e-12, atol=1e-12)


def test_attention_is_scaled_dot_product(rng):
    x = rng.normal(size=(1, 3, 4))
    eye, zero = np.eye(4), np.zeros(4)
    y = nn.multihead_attention(x, eye, zero, eye, zero, eye, zero, eye, zero, heads=1).data
    s = x[0] @ x[0].T / 2.0
    w = np.exp(s - s.max(axis=1, keepdims=True))
    w /= w.sum(axis=1, keepdims=True)
    np.testing.assert_allclose(y[0], w @ x[0], rtol=1e-12)


def test_shape_errors_name_the_op():
    with pytest.raises(ShapeError, match="matmul"):
        nn.matmul(np.zeros((2, 3)), np.zeros((4, 2)))
    with pytest.raises(ShapeError, match="concat"):
        nn.concat([np.zeros((2, 3)), np.zeros((3, 3))], axis=-1)
    with pytest.raises(ShapeError, match="multihead_attention"):
        nn.multihead_attention(np.zeros((1, 2, 6)), *[np.zeros((6, 6)), np.zeros(6)] * 4, heads=4)


def test_masked_pools_ignore_padding(rng):
    x = rng.normal(size=(2, 6, 3))
    mask = np.array([[1, 1, 0, 0, 0, 0], [1, 1, 1, 1, 1, 1]], dtype=bool)
    y = x.copy()
    y[0, 2:] = 1e6
    for pool in (nn.mean_pool, nn.max_pool):
        np.testing.assert_array_equal(pool(x, mask).data, pool(y, mask).data)
    np.testing.assert_allclose(nn.mean_pool(x, mask).data[0], x[0, :2].mean(axis=0))


def test_batchnorm_train_and_eval(rng):
    running = {"mean": np.zeros(3), "var": np.ones(3)}
    g, b = np.ones(3), np.zeros(3)
    x = rng.normal(loc=2.0, scale=3.0, size=(64, 3))
    y = nn.batchnorm(x, g, b, running, True).data
    np.testing.assert_allclose(y.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(y.var(axis=0), x.var(axis=0) / (x.var(axis=0) + 1e-5), rtol=1e-12)
    np.testing.assert_allclose(running["mean"], 0.1 * x.mean(axis=0), rtol=1e-12)
    for _ in range(300):
        nn.batchnorm(x, g, b, running, True)
    np.testing.assert_allclose(running["mean"], x.mean(axis=0), rtol=1e-9)
    np.testing.assert_allclose(running["var"], x.var(axis=0), rtol=1e-9)
    ev = nn.batchnorm(x, g, b, running, False).data
    np.testing.assert_allclose(ev, (x - x.mean(0)) / np.sqrt(x.var(0) + 1e-5), rtol=1e-8)


def test_batchnorm_mask_keeps_pads_at_zero(rng):
    running = {"mean": np.zeros(2), "var": np.ones(2)}
    x = rng.normal(size=(2, 4, 2))
    mask = np.array([[1, 1, 0, 0], [1, 1, 1, 0]], dtype=bool)
    y = nn.batchnorm(x, np.ones(2), np.ones(2), running, True, mask).data
    assert np.all(y[~mask] == 0)
    np.testing.assert_allclose(running["mean"], 0.1 * x[mask].mean(axis=0), rtol=1e-12)


def test_dropout_is_keyed_and_inverted():
    x = np.ones((200, 50))
    a = nn.dropout(x, 0.3, True, (7, 1, 5)).data
    b = nn.dropout(x, 0.3, True, (7, 1, 5)).data
    c = nn.dropout(x, 0.3, True, (7, 1, 6)).data
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert set(np.unique(a)) == {0.0, 1 / 0.7}
    assert abs((a == 0).mean() - 0.3) < 0.02
    assert np.array_equal(nn.dropout(x, 0.3, False).data, x)


def test_tape_accumulates_shared_inputs():
    x = nn.Tensor(np.array([3.0]), requires_grad=True)
    y = nn.add(nn.scale(x, 2.0), nn.scale(x, 5.0))
    y.backward()
    np.testing.assert_array_equal(x.grad, [7.0])


# -- optimizer ----------------------------------------------------------------

def test_adamw_zero_grad_is_noop():
    s = nn.ParamStore()
    p = s.add("p", np.array([1.0, -2.0]))
    nn.adamw_step(s, 0.1, weight_decay=0.0, grads={"p": np.zeros(2)})
    np.testing.assert_array_equal(p.data, [1.0, -2.0])


def test_adamw_first_step():
    s = nn.ParamStore()
    p = s.add("p", np.array([0.0]))
    nn.adamw_step(s, 0.1, weight_decay=0.0, betas=(0.9, 0.999), eps=1e-8, grads={"p": np.array([1.0])})
    assert p.data[0] == pytest.approx(-0.1, abs=1e-8)


def test_adamw_clips_global_norm():
    s = nn.ParamStore()
    s.add("a", np.zeros(1))
    s.add("b", np.zeros(1))
    norm = nn.adamw_step(s, 0.1, weight_decay=0.0, clip=1.0,
                         grads={"a": np.array([3.0]), "b": np.array([4.0])})
    assert norm == 5.0
    np.testing.assert_allclose(s.m["a"], [0.1 * 0.6])
    np.testing.assert_allclose(s.m["b"], [0.1 * 0.8])


def test_adamw_decay_is_decoupled_and_selective():
    s = nn.ParamStore()
    w = s.add("w", np.array([2.0]))
    b = s.add("b", np.array([2.0]), decay=False)
    nn.adamw_step(s, 0.5, weight_decay=0.1, grads={})
    np.testing.assert_allclose(w.data, [2.0 - 0.5 * 0.1 * 2.0])
    np.testing.assert_array_equal(b.data, [2.0])


def test_adamw_names_nonfinite_parameter():
    s = nn.ParamStore()
    s.add("layer.w", np.zeros(2))
    with pytest.raises(NonFiniteGradient, match="layer.w"):
        nn.adamw_step(s, 0.1, grads={"layer.w": np.array([np.nan, 0])})


def test_cosine_schedule():
    assert nn.cosine_lr(0, 100, 1e-3, 1e-5) == 1e-3
    assert nn.cosine_lr(100, 100, 1e-3, 1e-5) == pytest.approx(1e-5, rel=1e-12)
    assert nn.cosine_lr(50, 100, 1e-3, 1e-5) == pytest.approx((1e-3 + 1e-5) / 2, rel=1e-12)
    with pytest.raises(InvalidInput):
        nn.cosine_lr(101, 100, 1e-3, 1e-5)


# -- parameters and checkpoints ------------------------------------------------

def test_store_rejects_duplicate_names():
    s = nn.ParamStore()
    nn.Linear(s, "a", 2, 3)
    with pytest.raises(KeyError):
        nn.Linear(s, "a", 2, 3)
    assert s.n_values() == 9


def test_linear_init_bounds():
    s = nn.ParamStore(3)
    lin = nn.Linear(s, "l", 16, 200)
    assert np.abs(lin.w.data).max() <= math.sqrt(6 / 16)
    assert np.all(lin.b.data == 0) and not s.decay["l.b"] and s.decay["l.w"]


def test_checkpoint_roundtrip(tmp_path):
    s = nn.ParamStore(1)
    nn.Block(s, "blk", 4, 5)
    s.params["blk.lin.w"].data[0, 0] = np.pi
    path = tmp_path / "m.ckpt"
    nn.save_checkpoint(path, s.state_arrays(), {"step": 3, "note": "x"})
    arrays, meta = nn.load_checkpoint(path)
    assert meta == {"step": 3, "note": "x"}
    t = nn.ParamStore(2)
    nn.Block(t, "blk", 4, 5)
    t.load_arrays(arrays)
    for k, v in s.state_arrays().items():
        assert v.tobytes() == t.state_arrays()[k].tobytes()
    assert path.read_bytes()[:8] == MAGIC


def test_checkpoint_errors(tmp_path):
    with pytest.raises(IncompatibleCheckpoint, match="does not exist"):
        nn.load_checkpoint(tmp_path / "none")
    p = tmp_path / "bad"
    p.write_bytes(b"NOTACKPT" + b"\0" * 20)
    with pytest.raises(IncompatibleCheckpoint, match="magic"):
        nn.load_checkpoint(p)
    s = nn.ParamStore()
    nn.Linear(s, "l", 2, 2)
    nn.save_checkpoint(p, s.state_arrays(), {})
    raw = bytearray(p.read_bytes())
    raw[8] = nn.CHECKPOINT_VERSION + 1
    p.write_bytes(bytes(raw))
    with pytest.raises(IncompatibleCheckpoint, match="version"):
        nn.load_checkpoint(p)
    other = nn.ParamStore()
    nn.Linear(other, "l", 2, 3)
    with pytest.raises(IncompatibleCheckpoint):
        other.load_arrays(s.state_arrays())


def test_finite_check_flag(monkeypatch):
    from tunpd.nn import tensor

    monkeypatch.setattr(tensor, "DEBUG_FINITE", True)
    with pytest.raises(FloatingPointError):
        nn.relu(nn.Tensor(np.array([np.inf]), requires_grad=True))
