import numpy as np

from networks.ModuleInterface import Module
from tensor_core.Tensor import Tensor
from tensor_core.functional import conv2d


class Conv2d(Module):
    """
    Convolution layer with uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero bias
    """

    def __init__(self, in_channels, out_channels, kernel_size=3, stride=1, padding=None,
                 bias=True, rng=None, zero_init=False):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        if zero_init:
            weight = np.zeros(shape)
        else:
            limit = 1.0 / np.sqrt(in_channels * kernel_size * kernel_size)
            weight = rng.uniform(-limit, limit, size=shape)
        self.weight = Tensor(weight, requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True) if bias else None

    def forward(self, x):
        return conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)
