import numpy as np

from errors import DatasetError, ShapeError
from networks.SemanticLayout import SemanticLayout
from tensor_core.Tensor import Tensor


def one_hot(label_map, num_classes):
    """
    Encodes integer label maps as a one-hot semantic layout

    Args:
        label_map (np.ndarray): H×W or N×H×W class ids
        num_classes (int): C

    Returns:
        SemanticLayout: N×C×H×W

    Raises:
        DatasetError: an id is negative or >= C
    """
    label_map = np.asarray(label_map)
    if label_map.ndim == 2:
        label_map = label_map[None]
    if label_map.ndim != 3:
        raise ShapeError(f'label maps must be H×W or N×H×W, got shape {label_map.shape}')
    if label_map.size and (label_map.min() < 0 or label_map.max() >= num_classes):
        raise DatasetError(f'label ids must lie in [0, {num_classes}), found range [{label_map.min()}, {label_map.max()}]')
    mask = (label_map[:, None, :, :] == np.arange(num_classes).reshape(1, -1, 1, 1)).astype(np.float32)
    return SemanticLayout(Tensor(mask), validate=False)


def argmax_labels(scores):
    """
    Inverse of one_hot, also turns class logits into predicted label maps

    Args:
        scores (SemanticLayout | Tensor | np.ndarray): N×C×H×W

    Returns:
        np.ndarray: N×H×W int64 class ids
    """
    if isinstance(scores, SemanticLayout):
        return scores.label_maps()
    data = scores.data if isinstance(scores, Tensor) else np.asarray(scores)
    return data.argmax(axis=1)
