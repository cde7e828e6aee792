import numpy as np

from errors import ArrangementError, ShapeError
from tensor_core.Tensor import Function, as_tensor
from wavelet.WaveletFeatures import Arrangement, WaveletFeatures

SUBBANDS = ('LL', 'LH', 'HL', 'HH')


def haar_analysis(x):
    """
    Orthonormal 2D Haar on every 2×2 block [[a, b], [c, d]] of an N×C×H×W array

    Returns:
        np.ndarray: N×4C×H/2×W/2, subband-major (all LL, then LH, HL, HH)
    """
    a = x[:, :, 0::2, 0::2]
    b = x[:, :, 0::2, 1::2]
    c = x[:, :, 1::2, 0::2]
    d = x[:, :, 1::2, 1::2]
    ll = (a + b + c + d) / 2
    lh = (a - b + c - d) / 2
    hl = (a + b - c - d) / 2
    hh = (a - b - c + d) / 2
    return np.concatenate([ll, lh, hl, hh], axis=1)


def haar_synthesis(coefficients):
    """
    Exact inverse of haar_analysis
    """
    ll, lh, hl, hh = np.split(coefficients, 4, axis=1)
    n, c, h, w = ll.shape
    out = np.empty((n, c, 2 * h, 2 * w), dtype=coefficients.dtype)
    out[:, :, 0::2, 0::2] = (ll + lh + hl + hh) / 2
    out[:, :, 0::2, 1::2] = (ll - lh + hl - hh) / 2
    out[:, :, 1::2, 0::2] = (ll + lh - hl - hh) / 2
    out[:, :, 1::2, 1::2] = (ll - lh - hl + hh) / 2
    return out


def channelwise_to_spatial(coefficients):
    ll, lh, hl, hh = np.split(coefficients, 4, axis=1)
    top = np.concatenate([ll, lh], axis=3)
    bottom = np.concatenate([hl, hh], axis=3)
    return np.concatenate([top, bottom], axis=2)


def spatial_to_channelwise(tiled):
    h, w = tiled.shape[2] // 2, tiled.shape[3] // 2
    return np.concatenate(
        [tiled[:, :, :h, :w], tiled[:, :, :h, w:], tiled[:, :, h:, :w], tiled[:, :, h:, w:]],
        axis=1,
    )


# the Haar basis is orthonormal, so each transform's adjoint is its inverse

class HaarAnalysis(Function):
    def forward(self, x):
        return haar_analysis(x)

    def backward(self, grad):
        return (haar_synthesis(grad),)


class HaarSynthesis(Function):
    def forward(self, coefficients):
        return haar_synthesis(coefficients)

    def backward(self, grad):
        return (haar_analysis(grad),)


class ToSpatial(Function):
    def forward(self, coefficients):
        return channelwise_to_spatial(coefficients)

    def backward(self, grad):
        return (spatial_to_channelwise(grad),)


class ToChannelwise(Function):
    def forward(self, tiled):
        return spatial_to_channelwise(tiled)

    def backward(self, grad):
        return (channelwise_to_spatial(grad),)


def _check_even(x, op_name):
    if x.ndim != 4:
        raise ShapeError(f'{op_name} expects an N×C×H×W tensor, got shape {x.shape}')
    if x.shape[2] % 2 or x.shape[3] % 2:
        raise ShapeError(f'{op_name} needs even spatial extents, got {x.shape[2]}×{x.shape[3]}')


def dwt_channelwise(x):
    """
    Single-level Haar DWT with subbands stacked along channels

    Args:
        x (Tensor): N×c×h×w, h and w even

    Returns:
        WaveletFeatures: N×4c×h/2×w/2
    """
    x = as_tensor(x)
    _check_even(x, 'dwt_channelwise')
    return WaveletFeatures(HaarAnalysis.apply(x), Arrangement.CHANNELWISE, x.shape[1])


def iwt_channelwise(features):
    """
    Inverse of dwt_channelwise

    Args:
        features (WaveletFeatures): channelwise coefficients

    Returns:
        Tensor: N×c×h×w
    """
    if not isinstance(features, WaveletFeatures):
        raise ArrangementError('iwt_channelwise expects WaveletFeatures')
    features.expect(Arrangement.CHANNELWISE)
    return HaarSynthesis.apply(features.tensor)


def dwt_spatial(x):
    """
    Haar DWT with subbands tiled as quadrants; output shape equals input shape
    """
    return arrange(dwt_channelwise(x), Arrangement.SPATIAL)


def iwt_spatial(features):
    """
    Inverse of dwt_spatial
    """
    if not isinstance(features, WaveletFeatures):
        raise ArrangementError('iwt_spatial expects WaveletFeatures')
    features.expect(Arrangement.SPATIAL)
    return iwt_channelwise(arrange(features, Arrangement.CHANNELWISE))


def arrange(features, target):
    """
    Permutes coefficients between channelwise and spatial layouts

    Args:
        features (WaveletFeatures):
        target (Arrangement | str):

    Returns:
        WaveletFeatures: same coefficients in the target layout
    """
    target = Arrangement(target)
    if features.arrangement == target:
        return features
    if target == Arrangement.SPATIAL:
        tensor = ToSpatial.apply(features.tensor)
    else:
        tensor = ToChannelwise.apply(features.tensor)
    return WaveletFeatures(tensor, target, features.source_channels)


def dwt(x, arrangement=Arrangement.CHANNELWISE):
    if Arrangement(arrangement) == Arrangement.SPATIAL:
        return dwt_spatial(x)
    return dwt_channelwise(x)


def iwt(features):
    if features.arrangement == Arrangement.SPATIAL:
        return iwt_spatial(features)
    return iwt_channelwise(features)


def split_subbands(features):
    """
    Splits channelwise coefficients into a dict of N×c×h×w arrays keyed by subband name
    """
    coefficients = arrange(features, Arrangement.CHANNELWISE).tensor.data
    return dict(zip(SUBBANDS, np.split(coefficients, 4, axis=1)))


def wavedec(x, levels):
    """
    Repeated DWT on the LL band

    Args:
        x (Tensor): N×c×h×w, extents divisible by 2**levels
        levels (int): at least 1

    Returns:
        list of dict: per level (finest first) subband arrays; the last dict also holds the coarsest LL
    """
    if levels < 1:
        raise ShapeError(f'levels must be >= 1, got {levels}')
    x = as_tensor(x)
    step = 2 ** levels
    if x.shape[2] % step or x.shape[3] % step:
        raise ShapeError(f'{levels}-level decomposition needs extents divisible by {step}, got {x.shape[2:]}')
    decomposition = []
    current = x
    for _ in range(levels):
        bands = split_subbands(dwt_channelwise(current))
        decomposition.append(bands)
        current = as_tensor(bands['LL'], dtype=x.dtype)
    return decomposition


def waverec(decomposition):
    """
    Inverse of wavedec

    Returns:
        np.ndarray: reconstructed N×c×h×w array
    """
    current = decomposition[-1]['LL']
    for bands in reversed(decomposition):
        stacked = np.concatenate([current, bands['LH'], bands['HL'], bands['HH']], axis=1)
        current = haar_synthesis(stacked)
    return current
