import logging

from pathlib import Path

import numpy as np

from tqdm import tqdm

from data.batches import UnpairedBatchSampler
from data.labels import one_hot
from errors import NonFiniteError, TrainingDivergedError
from losses import adversarial_losses, class_weights_from_label_maps, generator_objective, seg_loss
from networks.SemanticLayout import sample_latents
from networks.UNetSegmenter import REAL_IMAGE_TAG
from results_builder import write_metrics_csv
from tensor_core.Tensor import Tensor, backward
from training.ModelBundle import ModelBundle
from training.checkpoint import save_checkpoint
from visualize import colorize, save_grid

logger = logging.getLogger(__name__)

METRICS_FILE = 'metrics.csv'
CHECKPOINT_FILE = 'checkpoint.ckpt'
SAMPLE_ROWS = 4
SAMPLE_DRAWS = 3


def real_image_batch(images):
    """
    Wraps dataset images in a tensor tagged as real
    """
    return Tensor(images, tags={REAL_IMAGE_TAG})


def step_rng(seed, step):
    return np.random.default_rng([seed, step])


def _dump_diverged(dump_dir, step, layout, real, latents, error):
    if dump_dir is None:
        return None
    path = Path(dump_dir) / f'diverged_step_{step:06d}.npz'
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, masks=layout.label_maps(), images=real.data, latents=latents, step=step, error=str(error))
    return path


def train_step(bundle, layout, real, class_weights, config=None, dump_dir=None):
    """
    One unpaired training step

    (1) Discriminator update on the real batch (with R1) against detached fakes.
    (2) Joint generator and segmenter update on
        seg_loss(S(G(m)), m) + λ·softplus(-D(G(m))).
    The segmenter only ever sees generated images.

    Args:
        bundle (ModelBundle): updated in place, step incremented
        layout (SemanticLayout): mask batch fed to the generator
        real (Tensor): real image batch, unrelated to layout
        class_weights (ClassWeights):
        config (TrainConfig, optional): defaults to the bundle's config
        dump_dir (str | Path, optional): where to write a diagnostic dump on divergence

    Returns:
        dict: step, loss_seg, loss_G_adv, loss_D, r1

    Raises:
        TrainingDivergedError: a loss or activation became non-finite
    """
    config = config or bundle.config
    step = bundle.step
    rng = step_rng(config.seed, step)
    latents_d = sample_latents(layout.batch_size, config.z_dim, rng)
    latents_g = sample_latents(layout.batch_size, config.z_dim, rng)
    generator, discriminator, segmenter = bundle.generator, bundle.discriminator, bundle.segmenter
    loss_config = config.loss_config()
    r1_scale = config.r1_every if step % config.r1_every == 0 else 0

    try:
        bundle.opt_d.zero_grad()
        fake = generator(layout, latents=latents_d).detach()
        loss_d_total, _, r1 = adversarial_losses(discriminator, real, fake, loss_config, r1_scale=r1_scale)
        backward(loss_d_total)
        loss_d = loss_d_total.item()
        if not np.isfinite(loss_d):
            raise NonFiniteError('discriminator loss is not finite')
        bundle.opt_d.step()

        bundle.opt_g.zero_grad()
        bundle.opt_s.zero_grad()
        fake = generator(layout, latents=latents_g)
        loss_seg = seg_loss(segmenter(fake), layout, class_weights)
        _, loss_g_adv, _ = adversarial_losses(discriminator, real, fake, loss_config, r1_scale=0)
        total = generator_objective(loss_seg, loss_g_adv, loss_config.lambda_adv)
        if not np.isfinite(total.item()):
            raise NonFiniteError('generator objective is not finite')
        backward(total)
        discriminator.zero_grad()
        bundle.opt_g.step()
        bundle.opt_s.step()
    except NonFiniteError as e:
        path = _dump_diverged(dump_dir, step, layout, real, latents_g, e)
        logger.error('training diverged', extra={'step': step, 'dump': str(path) if path else None})
        raise TrainingDivergedError(f'training diverged at step {step}: {e}')

    bundle.step += 1
    return {
        'step': step,
        'loss_seg': loss_seg.item(),
        'loss_G_adv': loss_g_adv.item(),
        'loss_D': loss_d,
        'r1': r1.item(),
    }


def save_samples(path, bundle, label_maps, colors, seed):
    """
    Writes a grid with one row per mask: colorized mask, then generations for several noise draws
    """
    layout = one_hot(label_maps, bundle.num_classes)
    draws = [
        bundle.generator(layout, latents=sample_latents(layout.batch_size, bundle.config.z_dim, [seed, draw])).data
        for draw in range(SAMPLE_DRAWS)
    ]
    rows = [
        [colorize(label_map, colors)] + [images[i] for images in draws]
        for i, label_map in enumerate(label_maps)
    ]
    save_grid(path, rows)


def fit(config, dataset, out_dir=None, bundle=None, progress=True):
    """
    Runs train_step until config.steps, checkpointing and logging on schedule

    Args:
        config (TrainConfig):
        dataset (WorldDataset): masks and images are sampled independently
        out_dir (str | Path, optional): receives metrics.csv, checkpoints and sample grids
        bundle (ModelBundle, optional): resume from this bundle (its step is kept)
        progress (bool): show a tqdm bar

    Returns:
        tuple: (ModelBundle, list of metric records produced by this call)
    """
    num_classes = dataset.num_classes
    bundle = bundle or ModelBundle(config, num_classes)
    history = []
    if config.steps <= bundle.step:
        return bundle, history

    class_weights = class_weights_from_label_maps(dataset.label_maps, num_classes)
    sampler = UnpairedBatchSampler(len(dataset.label_maps), len(dataset.images), config.batch, config.seed)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    resumed = bundle.step > 0

    start = bundle.step
    metrics_path = out_dir / METRICS_FILE if out_dir is not None else None
    append = resumed and metrics_path is not None and metrics_path.is_file()
    try:
        for step in tqdm(range(start, config.steps), disable=not progress, desc='train'):
            mask_idx, image_idx = sampler.batch(step)
            layout = one_hot(dataset.label_maps[mask_idx], num_classes)
            real = real_image_batch(dataset.images[image_idx])
            record = train_step(bundle, layout, real, class_weights, config, dump_dir=out_dir)
            history.append(record)

            done = step + 1
            if done % config.log_every == 0 or done == config.steps:
                logger.info('train step', extra=record)
            if out_dir is None:
                continue
            if config.checkpoint_every and done % config.checkpoint_every == 0:
                save_checkpoint(out_dir / 'checkpoints' / f'step_{done:06d}.ckpt', bundle)
            if config.sample_every and done % config.sample_every == 0:
                save_samples(
                    out_dir / f'samples_{done:06d}.png', bundle,
                    dataset.label_maps[mask_idx[:SAMPLE_ROWS]], dataset.spec.base_colors, config.seed,
                )
    finally:
        # rows logged before a divergence are kept
        if metrics_path is not None:
            write_metrics_csv(metrics_path, history, append=append)

    if out_dir is not None:
        save_checkpoint(out_dir / CHECKPOINT_FILE, bundle)
    return bundle, history
