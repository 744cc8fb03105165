"""Small reverse-mode autodiff substrate on top of numpy."""

from . import functional
from .functional import (
    conv1d,
    gelu,
    global_avg_pool,
    grn,
    layer_norm,
    linear,
    mse_masked,
    softmax_cross_entropy,
)
from .gradcheck import check_gradients, numeric_grad
from .layers import GRN, Conv1d, LayerNorm, Linear, Module, Parameter, trunc_normal
from .tensor import Tensor, as_tensor, no_grad

__all__ = [
    "GRN", "Conv1d", "LayerNorm", "Linear", "Module", "Parameter", "Tensor",
    "as_tensor", "check_gradients", "conv1d", "functional", "gelu", "global_avg_pool",
    "grn", "layer_norm", "linear", "mse_masked", "no_grad", "numeric_grad",
    "softmax_cross_entropy", "trunc_normal",
]
