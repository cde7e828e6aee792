import numpy as np

from PIL import Image, UnidentifiedImageError

from errors import DatasetError, ShapeError

MAX_LABEL_CLASSES = 256


def to_uint8(image):
    """
    Maps values in [-1, 1] to 8-bit: round((v + 1) * 127.5)
    """
    return np.clip(np.round((np.asarray(image, dtype=np.float64) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def from_uint8(pixels):
    return (np.asarray(pixels, dtype=np.float32) / 127.5 - 1.0).astype(np.float32)


def _open(path):
    try:
        image = Image.open(path)
        image.load()
    except (UnidentifiedImageError, OSError, ValueError) as e:
        raise DatasetError(f'cannot read PNG {path}: {e}')
    return image


def write_image_png(path, image):
    """
    Writes a 3×H×W image with values in [-1, 1] as 8-bit RGB
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ShapeError(f'images must be 3×H×W, got shape {image.shape}')
    Image.fromarray(to_uint8(image).transpose(1, 2, 0)).save(path, format='PNG')


def read_image_png(path):
    """
    Reads an 8-bit RGB PNG

    Returns:
        np.ndarray: 3×H×W float32 in [-1, 1]
    """
    image = _open(path)
    if image.mode not in ('RGB', 'RGBA', 'L'):
        raise DatasetError(f'{path} has unsupported mode {image.mode}, expected 8-bit RGB')
    pixels = np.asarray(image.convert('RGB'))
    return from_uint8(pixels.transpose(2, 0, 1))


def write_label_png(path, label_map, num_classes=None):
    """
    Writes an H×W label map as 8-bit grayscale, pixel value = class id
    """
    label_map = np.asarray(label_map)
    if label_map.ndim != 2:
        raise ShapeError(f'label maps must be H×W, got shape {label_map.shape}')
    if num_classes is not None and num_classes > MAX_LABEL_CLASSES:
        raise DatasetError(f'{num_classes} classes do not fit an 8-bit label PNG')
    if label_map.size and (label_map.min() < 0 or label_map.max() >= MAX_LABEL_CLASSES):
        raise DatasetError(f'label ids must lie in [0, {MAX_LABEL_CLASSES}) to be stored in {path}')
    Image.fromarray(label_map.astype(np.uint8)).save(path, format='PNG')


def read_label_png(path, num_classes=None):
    """
    Reads an 8-bit grayscale label PNG

    Args:
        path (str | Path):
        num_classes (int, optional): ids must be below this

    Returns:
        np.ndarray: H×W int64 class ids
    """
    if num_classes is not None and num_classes > MAX_LABEL_CLASSES:
        raise DatasetError(f'{num_classes} classes do not fit an 8-bit label PNG')
    image = _open(path)
    if image.mode not in ('L', 'P'):
        raise DatasetError(f'{path} has mode {image.mode}, label maps must be 8-bit grayscale')
    label_map = np.asarray(image).astype(np.int64)
    if num_classes is not None and label_map.size and label_map.max() >= num_classes:
        raise DatasetError(f'{path} contains class id {label_map.max()} but the world has {num_classes} classes')
    return label_map
