from dataclasses import dataclass

import numpy as np

from scipy import fft

from errors import ShapeError, WavegenError

# added before taking the log of the power profile
LOG_FLOOR = 1e-12


@dataclass
class ConfusionMatrix():
    """
    C×C pixel counts, rows are ground truth and columns are predictions
    """
    counts: np.ndarray

    @classmethod
    def from_label_maps(cls, pred, gt, num_classes):
        pred, gt = np.asarray(pred), np.asarray(gt)
        if pred.shape != gt.shape:
            raise ShapeError(f'prediction {pred.shape} and ground truth {gt.shape} differ')
        for name, labels in (('prediction', pred), ('ground truth', gt)):
            if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
                raise ShapeError(f'{name} holds ids outside [0, {num_classes})')
        flat = gt.reshape(-1).astype(np.int64) * num_classes + pred.reshape(-1).astype(np.int64)
        counts = np.bincount(flat, minlength=num_classes * num_classes)
        return cls(counts.reshape(num_classes, num_classes))

    @property
    def total(self):
        return int(self.counts.sum())

    def present(self):
        """
        Classes that occur in the ground truth or the prediction
        """
        return (self.counts.sum(axis=0) + self.counts.sum(axis=1)) > 0

    def iou(self):
        """
        Per-class intersection over union, NaN for classes absent from both maps
        """
        diag = np.diag(self.counts).astype(np.float64)
        union = self.counts.sum(axis=0) + self.counts.sum(axis=1) - diag
        iou = np.full(len(diag), np.nan)
        present = union > 0
        iou[present] = diag[present] / union[present]
        return iou

    def miou(self):
        iou = self.iou()
        present = self.present()
        if not present.any():
            return float('nan')
        return float(iou[present].mean())


def miou(pred, gt, num_classes):
    """
    Mean intersection over union over the classes present in gt or pred

    Args:
        pred (np.ndarray): predicted label map(s)
        gt (np.ndarray): reference label map(s), same shape
        num_classes (int):

    Returns:
        tuple: (mIoU in [0, 1], ConfusionMatrix)
    """
    matrix = ConfusionMatrix.from_label_maps(pred, gt, num_classes)
    return matrix.miou(), matrix


def radial_power_profile(images):
    """
    Radially averaged power spectrum of an image set

    |FFT2|² is averaged over images and channels, binned by integer frequency
    radius and log-scaled.

    Args:
        images (np.ndarray): N×c×H×W

    Returns:
        np.ndarray: one log10 power value per radius bin
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4 or images.shape[0] == 0:
        raise WavegenError(f'spectrum needs a non-empty N×c×H×W image set, got shape {images.shape}')
    power = np.abs(fft.fft2(images, axes=(2, 3))) ** 2
    mean_power = power.mean(axis=(0, 1))
    height, width = mean_power.shape
    fy = fft.fftfreq(height) * height
    fx = fft.fftfreq(width) * width
    radius = np.round(np.sqrt(fy[:, None] ** 2 + fx[None, :] ** 2)).astype(np.int64).reshape(-1)
    sums = np.bincount(radius, weights=mean_power.reshape(-1))
    counts = np.bincount(radius)
    profile = sums[counts > 0] / counts[counts > 0]
    return np.log10(profile + LOG_FLOOR)


def spectrum_distance(set_a, set_b):
    """
    Mean squared difference between the log radial power profiles of two image sets

    Returns:
        float: symmetric, >= 0, 0 for sets with equal average spectra
    """
    set_a, set_b = np.asarray(set_a), np.asarray(set_b)
    if len(set_a) == 0 or len(set_b) == 0:
        raise WavegenError('spectrum distance needs two non-empty image sets')
    if set_a.shape[1:] != set_b.shape[1:]:
        raise ShapeError(f'image sets have different resolutions: {set_a.shape[1:]} vs {set_b.shape[1:]}')
    difference = radial_power_profile(set_a) - radial_power_profile(set_b)
    return float(np.mean(difference ** 2))
