"""Small float64 autodiff engine with just the layers the classifier uses."""
from .checkpoint import VERSION as CHECKPOINT_VERSION, load_checkpoint, save_checkpoint
from .ops import (
    add, add_bias, batchnorm, bmm, concat, dropout, dropout_mask, expand, linear, matmul,
    max_pool, mean_pool, multihead_attention, relu, reshape, scale, softmax, transpose,
)
from .optim import adamw_step, cosine_lr, global_norm
from .params import Attention, BatchNorm, Block, Context, Linear, ParamStore
from .tensor import Tensor, as_tensor

__all__ = [
    "Tensor", "as_tensor", "ParamStore", "Linear", "BatchNorm", "Block", "Attention", "Context",
    "add", "add_bias", "batchnorm", "bmm", "concat", "dropout", "dropout_mask", "expand",
    "linear", "matmul", "max_pool", "mean_pool", "multihead_attention", "relu", "reshape",
    "scale", "softmax", "transpose", "adamw_step", "cosine_lr", "global_norm",
    "save_checkpoint", "load_checkpoint", "CHECKPOINT_VERSION",
]
