import numpy as np

from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from errors import ShapeError
from tensor_core.Tensor import Function, as_tensor

LEAKY_SLOPE = 0.2


def _check_nchw(x, op_name):
    if x.ndim != 4:
        raise ShapeError(f'{op_name} expects an N×C×H×W tensor, got shape {x.shape}')


class Conv2d(Function):
    """
    Cross-correlation (no kernel flip) with zero padding
    """

    def forward(self, x, weight, bias=None, stride=1, padding=0):
        self.stride, self.padding = stride, padding
        self.x_shape = x.shape
        self.weight = weight
        k = weight.shape[-1]
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
        self.xp_shape = xp.shape
        # (N, Cin, Ho, Wo, k, k)
        windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
        self.windows = windows
        out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))
        out = out.transpose(0, 3, 1, 2)
        if bias is not None:
            out = out + bias.reshape(1, -1, 1, 1)
        return out

    def backward(self, grad):
        grads = [None, None, None][:len(self.inputs)]
        k = self.weight.shape[-1]
        s, p = self.stride, self.padding
        if self.needs_input_grad[1]:
            grads[1] = np.tensordot(grad, self.windows, axes=([0, 2, 3], [0, 2, 3]))
        if len(self.inputs) > 2 and self.needs_input_grad[2]:
            grads[2] = grad.sum(axis=(0, 2, 3))
        if self.needs_input_grad[0]:
            gxp = np.zeros(self.xp_shape, dtype=grad.dtype)
            ho, wo = grad.shape[2], grad.shape[3]
            for i in range(k):
                for j in range(k):
                    # (N, Cout, Ho, Wo) x (Cout, Cin) -> (N, Cin, Ho, Wo)
                    contribution = np.einsum('nohw,oc->nchw', grad, self.weight[:, :, i, j], optimize=True)
                    gxp[:, :, i:i + s * ho:s, j:j + s * wo:s] += contribution
            h, w = self.x_shape[2], self.x_shape[3]
            grads[0] = gxp[:, :, p:p + h, p:p + w]
        return tuple(grads)


def conv2d(input, weight, bias=None, stride=1, padding=0):
    """
    2D cross-correlation

    Args:
        input (Tensor): N×Cin×H×W
        weight (Tensor): Cout×Cin×k×k, k odd
        bias (Tensor, optional): Cout
        stride (int): step between output samples
        padding (int): zero padding on every border

    Returns:
        Tensor: N×Cout×H'×W' with H' = floor((H + 2p - k) / stride) + 1
    """
    input, weight = as_tensor(input), as_tensor(weight)
    _check_nchw(input, 'conv2d')
    if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
        raise ShapeError(f'conv2d weight must be Cout×Cin×k×k, got {weight.shape}')
    k = weight.shape[-1]
    if k % 2 == 0:
        raise ShapeError(f'conv2d kernel size must be odd, got {k}')
    if input.shape[1] != weight.shape[1]:
        raise ShapeError(f'conv2d input has {input.shape[1]} channels, weight expects {weight.shape[1]}')
    if min(input.shape[2], input.shape[3]) + 2 * padding < k:
        raise ShapeError(f'conv2d input {input.shape[2:]} with padding {padding} is smaller than kernel {k}')
    if stride < 1:
        raise ShapeError(f'conv2d stride must be >= 1, got {stride}')
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[0],):
            raise ShapeError(f'conv2d bias must have shape ({weight.shape[0]},), got {bias.shape}')
        return Conv2d.apply(input, weight, bias, stride=stride, padding=padding)
    return Conv2d.apply(input, weight, stride=stride, padding=padding)


def bilinear_matrix(size_in, size_out):
    """
    Interpolation matrix (size_out × size_in) for half-pixel-center bilinear sampling

    Source coordinate is (dst + 0.5) * scale - 0.5, clamped to the valid range.
    """
    scale = size_in / size_out
    src = (np.arange(size_out) + 0.5) * scale - 0.5
    src = np.clip(src, 0, size_in - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, size_in - 1)
    frac = src - lo
    matrix = np.zeros((size_out, size_in))
    rows = np.arange(size_out)
    np.add.at(matrix, (rows, lo), 1.0 - frac)
    np.add.at(matrix, (rows, hi), frac)
    return matrix


def nearest_matrix(size_in, size_out):
    """
    Selection matrix (size_out × size_in): each output takes floor((dst + 0.5) * scale)
    """
    scale = size_in / size_out
    src = np.minimum(np.floor((np.arange(size_out) + 0.5) * scale).astype(np.int64), size_in - 1)
    matrix = np.zeros((size_out, size_in))
    matrix[np.arange(size_out), src] = 1.0
    return matrix


class SeparableResize(Function):
    """
    Applies row matrix A_h and column matrix A_w: out = A_h · x · A_wᵀ
    """

    def forward(self, x, rows, cols):
        self.rows = rows.astype(x.dtype)
        self.cols = cols.astype(x.dtype)
        return self.rows @ x @ self.cols.T

    def backward(self, grad):
        return (self.rows.T @ grad @ self.cols,)


def _resize(input, out_h, out_w, matrix_fn, op_name):
    input = as_tensor(input)
    _check_nchw(input, op_name)
    if out_h < 1 or out_w < 1:
        raise ShapeError(f'{op_name} output size must be positive, got {out_h}×{out_w}')
    h, w = input.shape[2], input.shape[3]
    return SeparableResize.apply(input, rows=matrix_fn(h, out_h), cols=matrix_fn(w, out_w))


def bilinear_resize(input, out_h, out_w):
    """
    Bilinear resize with half-pixel centers and edge clamping

    Args:
        input (Tensor): N×C×H×W
        out_h (int):
        out_w (int):

    Returns:
        Tensor: N×C×out_h×out_w
    """
    return _resize(input, out_h, out_w, bilinear_matrix, 'bilinear_resize')


def nearest_resize(input, out_h, out_w):
    """
    Nearest-neighbour resize; integer factors replicate each pixel into a block

    Args:
        input (Tensor): N×C×H×W
        out_h (int):
        out_w (int):

    Returns:
        Tensor: N×C×out_h×out_w
    """
    return _resize(input, out_h, out_w, nearest_matrix, 'nearest_resize')


class LogSoftmax(Function):
    def forward(self, x, axis=1):
        self.axis = axis
        shifted = x - x.max(axis=axis, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        self.out = out
        return out

    def backward(self, grad):
        softmax = np.exp(self.out)
        return (grad - softmax * grad.sum(axis=self.axis, keepdims=True),)


def log_softmax(input, axis=1):
    """
    Numerically stable log-softmax over the channel axis
    """
    return LogSoftmax.apply(input, axis=axis)


class NormalizeFeatures(Function):
    def forward(self, x, axes, eps):
        self.axes = axes
        mean = x.mean(axis=axes, keepdims=True)
        var = x.var(axis=axes, keepdims=True)
        self.inv_std = 1.0 / np.sqrt(var + eps)
        self.normalized = (x - mean) * self.inv_std
        return self.normalized

    def backward(self, grad):
        y = self.normalized
        centered = grad - grad.mean(axis=self.axes, keepdims=True)
        return (self.inv_std * (centered - y * (grad * y).mean(axis=self.axes, keepdims=True)),)


NORM_AXES = {
    'batch': (0, 2, 3),
    'instance': (2, 3),
}


def normalize_features(input, mode='batch', eps=1e-5):
    """
    Per-channel standardization without affine parameters

    Args:
        input (Tensor): N×C×H×W
        mode (str): 'batch' reduces over N×H×W, 'instance' over H×W per sample
        eps (float): added to the variance

    Returns:
        Tensor: same shape
    """
    input = as_tensor(input)
    _check_nchw(input, 'normalize_features')
    if mode not in NORM_AXES:
        raise ShapeError(f'unknown normalization mode {mode!r}, expected one of {sorted(NORM_AXES)}')
    return NormalizeFeatures.apply(input, axes=NORM_AXES[mode], eps=eps)


class LeakyRelu(Function):
    def forward(self, x, slope):
        self.factor = np.where(x > 0, 1.0, slope).astype(x.dtype)
        return x * self.factor

    def backward(self, grad):
        return (grad * self.factor,)


def leaky_relu(input, slope=LEAKY_SLOPE):
    return LeakyRelu.apply(input, slope=slope)


class Tanh(Function):
    def forward(self, x):
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad):
        return (grad * (1.0 - self.out * self.out),)


def tanh(input):
    return Tanh.apply(input)


class Softplus(Function):
    def forward(self, x):
        self.x = x
        return np.logaddexp(0.0, x)

    def backward(self, grad):
        return (grad * expit(self.x),)


def softplus(input):
    """
    log(1 + exp(x)), stable for large |x|
    """
    return Softplus.apply(input)


class Concat(Function):
    def forward(self, *arrays, axis=1):
        self.axis = axis
        self.splits = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


def concat(tensors, axis=1):
    """
    Concatenates tensors along an axis (channels by default)
    """
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError('concat needs at least one tensor')
    reference = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(reference) or any(
            a != b for i, (a, b) in enumerate(zip(t.shape, reference)) if i != axis % len(reference)
        ):
            raise ShapeError(f'concat shapes {reference} and {t.shape} differ outside axis {axis}')
    return Concat.apply(*tensors, axis=axis)
