"""Parameter ownership and the handful of layers the model is built from."""
from __future__ import annotations

import math

import numpy as np

from ..errors import IncompatibleCheckpoint
from . import ops
from .tensor import Tensor


class ParamStore:
    """Named parameters, batchnorm buffers and AdamW moments.

    Names are dotted module paths; registering a name twice is an error, so
    every parameter has exactly one owner.
    """

    def __init__(self, seed: int = 0):
        self.rng_seed = int(seed)
        self.rng = np.random.default_rng(self.rng_seed)
        self.params: dict[str, Tensor] = {}
        self.decay: dict[str, bool] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0

    def _claim(self, name):
        if name in self.params or name in self.buffers:
            raise KeyError(f"{name!r} is already registered")

    def add(self, name: str, value: np.ndarray, decay: bool = True) -> Tensor:
        self._claim(name)
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self.params[name] = t
        self.decay[name] = decay
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def add_buffer(self, name: str, value: np.ndarray) -> np.ndarray:
        self._claim(name)
        arr = np.array(value, dtype=np.float64)
        self.buffers[name] = arr
        return arr

    def __iter__(self):
        return iter(self.params.items())

    def __len__(self):
        return len(self.params)

    def n_values(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    # flat views used by checkpoints -------------------------------------
    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for k, p in self.params.items():
            out[f"param/{k}"] = p.data
        for k, b in self.buffers.items():
            out[f"buffer/{k}"] = b
        for k in self.params:
            out[f"adam_m/{k}"] = self.m[k]
            out[f"adam_v/{k}"] = self.v[k]
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray]):
        expected = self.state_arrays()
        missing = sorted(set(expected) - set(arrays))
        extra = sorted(set(arrays) - set(expected))
        if missing or extra:
            raise IncompatibleCheckpoint(
                f"checkpoint tensors do not match the model (missing {missing[:3]}, unexpected {extra[:3]})")
        for k, dst in expected.items():
            src = arrays[k]
            if src.shape != dst.shape:
                raise IncompatibleCheckpoint(f"{k}: checkpoint shape {src.shape} != model shape {dst.shape}")
            dst[...] = src


class Linear:
    """Affine map on the last axis; He-uniform weights, zero bias."""

    def __init__(self, store: ParamStore, name: str, fan_in: int, fan_out: int):
        bound = math.sqrt(6.0 / fan_in)
        self.w = store.add(f"{name}.w", store.rng.uniform(-bound, bound, (fan_in, fan_out)))
        self.b = store.add(f"{name}.b", np.zeros(fan_out), decay=False)
        self.fan_in, self.fan_out = fan_in, fan_out

    def __call__(self, x):
        return ops.linear(x, self.w, self.b)


class BatchNorm:
    def __init__(self, store: ParamStore, name: str, channels: int, momentum: float = 0.1):
        self.gamma = store.add(f"{name}.gamma", np.ones(channels), decay=False)
        self.beta = store.add(f"{name}.beta", np.zeros(channels), decay=False)
        self.running = {
            "mean": store.add_buffer(f"{name}.mean", np.zeros(channels)),
            "var": store.add_buffer(f"{name}.var", np.ones(channels)),
        }
        self.momentum = momentum

    def __call__(self, x, training: bool, mask=None):
        return ops.batchnorm(x, self.gamma, self.beta, self.running, training, mask, self.momentum)


class Block:
    """Linear -> BatchNorm -> ReLU, optionally followed by dropout."""

    def __init__(self, store, name, fan_in, fan_out, p: float = 0.0, layer_id: int = 0):
        self.lin = Linear(store, f"{name}.lin", fan_in, fan_out)
        self.bn = BatchNorm(store, f"{name}.bn", fan_out)
        self.p = p
        self.layer_id = layer_id

    def __call__(self, x, ctx, mask=None):
        h = ops.relu(self.bn(self.lin(x), ctx.training, mask))
        if self.p > 0:
            h = ops.dropout(h, self.p, ctx.training and ctx.dropout, (ctx.seed, self.layer_id, ctx.step))
        return h


class Attention:
    def __init__(self, store, name, dim: int, heads: int):
        if dim % heads:
            raise ValueError(f"dimension {dim} is not divisible by {heads} heads")
        self.q = Linear(store, f"{name}.q", dim, dim)
        self.k = Linear(store, f"{name}.k", dim, dim)
        self.v = Linear(store, f"{name}.v", dim, dim)
        self.o = Linear(store, f"{name}.o", dim, dim)
        self.heads = heads

    def __call__(self, x, mask=None):
        return ops.multihead_attention(
            x, self.q.w, self.q.b, self.k.w, self.k.b, self.v.w, self.v.b,
            self.o.w, self.o.b, self.heads, mask)


class Context:
    """Per-call switches: mode, dropout enable, and the dropout key parts."""

    def __init__(self, training: bool = False, step: int = 0, seed: int = 0, dropout: bool = True):
        self.training = training
        self.step = step
        self.seed = seed
        self.dropout = dropout
