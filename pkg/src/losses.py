import logging

from dataclasses import dataclass, field
from typing import List, Literal

import numpy as np

from pydantic import BaseModel, Field

from errors import NonFiniteError, ShapeError, WavegenError
from networks.SemanticLayout import SemanticLayout
from tensor_core.Tensor import Tensor, as_tensor, backward
from tensor_core.functional import log_softmax, softplus

logger = logging.getLogger(__name__)

# finite-difference step of the R1 Hessian-vector product, relative to max |∂D/∂x|
R1_HVP_STEP = 1e-4


class LossConfig(BaseModel):
    lambda_adv: float = Field(1.0, ge=0.0)
    adversarial_form: Literal['non_saturating'] = 'non_saturating'
    r1_gamma: float = Field(1.0, ge=0.0)


@dataclass
class ClassWeights():
    """
    Class-balancing weights: alpha_c = total_pixels / pixel_counts[c], 0 for absent classes
    """
    alpha: np.ndarray
    pixel_counts: np.ndarray
    total_pixels: int
    absent_classes: List[int] = field(default_factory=list)

    @property
    def num_classes(self):
        return len(self.alpha)

    def scaled(self, factor):
        return ClassWeights(self.alpha * factor, self.pixel_counts, self.total_pixels, list(self.absent_classes))


def _masks_of(layouts):
    for layout in layouts:
        if isinstance(layout, SemanticLayout):
            yield layout.mask.data
        else:
            data = as_tensor(layout).data
            yield data[None] if data.ndim == 3 else data


def compute_class_weights(layouts):
    """
    Inverse per-pixel class frequency over a whole dataset

    Args:
        layouts (iterable): SemanticLayouts or one-hot arrays (N×C×H×W or C×H×W)

    Returns:
        ClassWeights: deterministic weights, absent classes get 0 and a warning

    Raises:
        WavegenError: no layouts were given
    """
    counts = None
    images = 0
    total_pixels = None
    for mask in _masks_of(layouts):
        per_image = mask.sum(axis=(2, 3), dtype=np.float64)
        if counts is None:
            counts = per_image.sum(axis=0)
            total_pixels = mask.shape[2] * mask.shape[3]
        else:
            if mask.shape[1] != counts.shape[0] or mask.shape[2] * mask.shape[3] != total_pixels:
                raise ShapeError(f'layout of shape {mask.shape} does not match the rest of the dataset')
            counts = counts + per_image.sum(axis=0)
        images += mask.shape[0]
    if counts is None or images == 0:
        raise WavegenError('cannot compute class weights of an empty dataset')

    pixel_counts = counts / images
    present = pixel_counts > 0
    alpha = np.zeros_like(pixel_counts)
    alpha[present] = total_pixels / pixel_counts[present]
    absent = [int(c) for c in np.flatnonzero(~present)]
    if absent:
        logger.warning('classes never appear in the dataset, weighting them 0', extra={'absent_classes': absent})
    return ClassWeights(alpha, pixel_counts, int(total_pixels), absent)


def class_weights_from_label_maps(label_maps, num_classes):
    """
    Same weights as compute_class_weights, computed from integer label maps

    Args:
        label_maps (np.ndarray): N×H×W class ids
        num_classes (int):

    Returns:
        ClassWeights:
    """
    label_maps = np.asarray(label_maps)
    if label_maps.size == 0:
        raise WavegenError('cannot compute class weights of an empty dataset')
    counts = np.bincount(label_maps.reshape(-1), minlength=num_classes)[:num_classes].astype(np.float64)
    images = label_maps.shape[0]
    total_pixels = label_maps.shape[1] * label_maps.shape[2]
    pixel_counts = counts / images
    present = pixel_counts > 0
    alpha = np.zeros(num_classes)
    alpha[present] = total_pixels / pixel_counts[present]
    absent = [int(c) for c in np.flatnonzero(~present)]
    if absent:
        logger.warning('classes never appear in the dataset, weighting them 0', extra={'absent_classes': absent})
    return ClassWeights(alpha, pixel_counts, int(total_pixels), absent)


def seg_loss(logits, layout, weights):
    """
    Class-balanced cross-entropy of segmenter logits against the input layout

    -(1/N) Σ_n Σ_c α_c Σ_ij m_cij log softmax(logits)_cij

    Args:
        logits (Tensor): N×C×H×W
        layout (SemanticLayout): the layout that was fed to the generator
        weights (ClassWeights):

    Returns:
        Tensor: scalar loss
    """
    logits = as_tensor(logits)
    mask = layout.mask if isinstance(layout, SemanticLayout) else as_tensor(layout)
    if logits.shape != mask.shape:
        raise ShapeError(f'segmenter logits {logits.shape} do not match layout {mask.shape}')
    if weights.num_classes != mask.shape[1]:
        raise ShapeError(f'class weights cover {weights.num_classes} classes, layout has {mask.shape[1]}')
    weighted = mask.data * weights.alpha.reshape(1, -1, 1, 1)
    target = Tensor(weighted, dtype=logits.dtype)
    return -(log_softmax(logits, axis=1) * target).sum() / logits.shape[0]


def _check_finite(logits, name):
    if not np.isfinite(logits.data).all():
        raise NonFiniteError(f'{name} logits are not finite')


def discriminator_loss(real_logits, fake_logits):
    """
    Non-saturating discriminator loss: mean softplus(-D(real)) + mean softplus(D(fake))
    """
    _check_finite(real_logits, 'real')
    _check_finite(fake_logits, 'fake')
    return softplus(-real_logits).mean() + softplus(fake_logits).mean()


def generator_adversarial_loss(fake_logits):
    """
    Non-saturating generator loss: mean softplus(-D(fake))
    """
    _check_finite(fake_logits, 'fake')
    return softplus(-fake_logits).mean()


def _batch_size(x):
    return x.shape[0] if x.ndim == 4 else 1


def r1_penalty(discriminator, real, gamma):
    """
    R1 gradient penalty (γ/2)·mean_n ‖∂D(x_n)/∂x_n‖² at real samples

    Args:
        discriminator (callable): maps an image tensor to logits
        real (Tensor | np.ndarray): real images
        gamma (float): penalty weight

    Returns:
        tuple: (penalty value as float, ∂ΣD/∂x as float64 array)
    """
    data = real.data if isinstance(real, Tensor) else np.asarray(real)
    x = Tensor(data, requires_grad=True, dtype=np.float64)
    params = list(discriminator.named_parameters()) if hasattr(discriminator, 'named_parameters') else []
    saved = [param.grad for _, param in params]
    try:
        backward(as_tensor(discriminator(x)).sum())
    finally:
        for (_, param), grad in zip(params, saved):
            param.grad = grad
    direction = x.grad if x.grad is not None else np.zeros(x.shape)
    squared = (direction.reshape(_batch_size(x), -1) ** 2).sum(axis=1)
    return 0.5 * gamma * float(squared.mean()), direction


def r1_parameter_gradients(discriminator, real, gamma, direction=None):
    """
    Gradient of the R1 penalty w.r.t. the discriminator parameters

    The penalty depends on ∂D/∂x, so its parameter gradient is a Hessian-vector
    product. It is taken as a central difference of parameter gradients along
    v = ∂ΣD/∂x, in 64-bit:
        γ/N · (∇θ ΣD(x + εv) - ∇θ ΣD(x - εv)) / 2ε

    Parameter values and any gradients already accumulated are restored.

    Args:
        discriminator (Module):
        real (Tensor | np.ndarray): real images
        gamma (float):
        direction (np.ndarray, optional): v, computed when not given

    Returns:
        dict: parameter name -> gradient array (float64)
    """
    params = list(discriminator.named_parameters())
    if gamma == 0:
        return {name: np.zeros(param.shape) for name, param in params}
    data = real.data if isinstance(real, Tensor) else np.asarray(real)
    data = data.astype(np.float64)

    saved = {name: (param.data, param.grad) for name, param in params}
    try:
        for _, param in params:
            param.data = param.data.astype(np.float64)
            param.grad = None
        if direction is None:
            _, direction = r1_penalty(discriminator, data, gamma)
        scale = float(np.abs(direction).max())
        if scale == 0:
            return {name: np.zeros(param.shape) for name, param in params}
        eps = R1_HVP_STEP / scale

        def param_grads(x):
            for _, param in params:
                param.grad = None
            backward(as_tensor(discriminator(Tensor(x, dtype=np.float64))).sum())
            return {name: (np.zeros(param.shape) if param.grad is None else param.grad) for name, param in params}

        plus = param_grads(data + eps * direction)
        minus = param_grads(data - eps * direction)
        factor = gamma / _batch_size(data)
        return {name: factor * (plus[name] - minus[name]) / (2 * eps) for name, _ in params}
    finally:
        for name, param in params:
            param.data, param.grad = saved[name]


def adversarial_losses(discriminator, real, fake, config=None, r1_scale=1.0):
    """
    Discriminator and generator adversarial losses plus the R1 penalty

    r1 enters loss_D as a constant. When the discriminator exposes parameters,
    r1_scale times the R1 parameter gradient is accumulated on them here, so a
    following backward(loss_D) leaves the full discriminator gradient.

    Args:
        discriminator (callable): image tensor -> logits
        real (Tensor): real images
        fake (Tensor): generated images
        config (LossConfig, optional):
        r1_scale (float): lazy regularization factor, 0 skips the penalty

    Returns:
        tuple: (loss_D including r1, loss_G, r1) scalar tensors
    """
    config = config or LossConfig()
    real, fake = as_tensor(real), as_tensor(fake)
    if real.shape != fake.shape:
        raise ShapeError(f'real {real.shape} and fake {fake.shape} batches differ')
    real_logits = discriminator(real)
    fake_logits = discriminator(fake)
    loss_d = discriminator_loss(real_logits, fake_logits)
    loss_g = generator_adversarial_loss(fake_logits)
    r1_value = 0.0
    if config.r1_gamma > 0 and r1_scale > 0:
        r1_value, direction = r1_penalty(discriminator, real, config.r1_gamma)
        if hasattr(discriminator, 'named_parameters'):
            grads = r1_parameter_gradients(discriminator, real, config.r1_gamma, direction)
            for name, param in discriminator.named_parameters():
                param.accumulate_grad(grads[name] * r1_scale)
    r1 = Tensor(r1_value, dtype=loss_d.dtype)
    return loss_d + r1, loss_g, r1


def generator_objective(seg, adv, lambda_adv):
    """
    seg + λ·adv
    """
    return seg + adv * lambda_adv
