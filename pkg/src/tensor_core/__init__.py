from tensor_core.Tensor import Tape, Tensor, backward
from tensor_core.functional import (
    bilinear_resize,
    concat,
    conv2d,
    leaky_relu,
    log_softmax,
    nearest_resize,
    normalize_features,
    softplus,
    tanh,
)
from tensor_core.AdamOptimizer import Adam, OptimizerState
