import numpy as np

from PIL import Image

from data.png_io import to_uint8
from errors import ShapeError

GRID_PADDING = 2


def colorize(label_map, colors):
    """
    Renders a label map with one color per class

    Args:
        label_map (np.ndarray): H×W class ids
        colors (np.ndarray): C×3 colors in 8-bit units

    Returns:
        np.ndarray: 3×H×W in [-1, 1]
    """
    colors = np.asarray(colors, dtype=np.float64)
    rgb = colors[np.asarray(label_map)]
    return (rgb.transpose(2, 0, 1) / 127.5 - 1.0).astype(np.float32)


def make_grid(rows):
    """
    Tiles rows of 3×H×W images (values in [-1, 1]) into one 8-bit picture

    Args:
        rows (list of list of np.ndarray): all images share one shape

    Returns:
        np.ndarray: H'×W'×3 uint8
    """
    if not rows or not rows[0]:
        raise ShapeError('grid needs at least one image')
    _, h, w = rows[0][0].shape
    columns = max(len(row) for row in rows)
    pad = GRID_PADDING
    grid = np.full((len(rows) * (h + pad) + pad, columns * (w + pad) + pad, 3), 255, dtype=np.uint8)
    for r, row in enumerate(rows):
        for c, image in enumerate(row):
            if image.shape != (3, h, w):
                raise ShapeError(f'grid images must all be 3×{h}×{w}, got {image.shape}')
            top, left = pad + r * (h + pad), pad + c * (w + pad)
            grid[top:top + h, left:left + w] = to_uint8(image).transpose(1, 2, 0)
    return grid


def save_grid(path, rows):
    Image.fromarray(make_grid(rows)).save(path, format='PNG')


def detail_to_uint8(coefficients):
    """
    Symmetric contrast around 0: zero maps to mid-gray 128

    Args:
        coefficients (np.ndarray): c×h×w detail subband

    Returns:
        np.ndarray: h×w×c uint8 (c = 1 or 3)
    """
    peak = float(np.abs(coefficients).max())
    scaled = coefficients / peak if peak > 0 else np.zeros_like(coefficients)
    pixels = np.clip(np.round(128.0 + 127.0 * scaled), 0, 255).astype(np.uint8)
    return pixels.transpose(1, 2, 0)


def approximation_to_uint8(coefficients, level):
    """
    LL band of level L holds 2**L times the local mean; maps it back to 8-bit
    """
    return to_uint8(coefficients / 2.0 ** level).transpose(1, 2, 0)


def save_subband(path, pixels):
    if pixels.shape[2] == 1:
        pixels = pixels[:, :, 0]
    Image.fromarray(pixels).save(path, format='PNG')


def spatial_pyramid(decomposition):
    """
    Mosaic of a multi-level decomposition with every level tiled as [LL | LH ; HL | HH]

    Args:
        decomposition (list of dict): output of wavedec for one image (c×h×w arrays)

    Returns:
        np.ndarray: H×W×c uint8
    """
    levels = len(decomposition)
    current = approximation_to_uint8(decomposition[-1]['LL'], levels)
    for bands in reversed(decomposition):
        top = np.concatenate([current, detail_to_uint8(bands['LH'])], axis=1)
        bottom = np.concatenate([detail_to_uint8(bands['HL']), detail_to_uint8(bands['HH'])], axis=1)
        current = np.concatenate([top, bottom], axis=0)
    return current
