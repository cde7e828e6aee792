import logging

from pathlib import Path

import numpy as np

from data.labels import one_hot
from errors import ShapeError
from evaluation.metrics import miou, spectrum_distance
from networks.SemanticLayout import sample_latents
from results_builder import build_report_df
from visualize import colorize, save_grid

logger = logging.getLogger(__name__)

REPORT_FILE = 'report.csv'
GRID_ROWS = 8


def generate_images(bundle, label_maps, seed=0, batch=None):
    """
    Runs the generator over label maps in batches

    Args:
        bundle (ModelBundle):
        label_maps (np.ndarray): N×H×W class ids
        seed (int): batch i draws latents from (seed, i)
        batch (int, optional): defaults to the training batch size

    Returns:
        np.ndarray: N×3×H×W in [-1, 1]
    """
    label_maps = np.asarray(label_maps)
    if label_maps.size and label_maps.max() >= bundle.num_classes:
        raise ShapeError(f'masks hold class id {label_maps.max()} but the model knows {bundle.num_classes} classes')
    batch = batch or bundle.config.batch
    outputs = []
    for i, start in enumerate(range(0, len(label_maps), batch)):
        layout = one_hot(label_maps[start:start + batch], bundle.num_classes)
        latents = sample_latents(layout.batch_size, bundle.config.z_dim, [seed, i])
        outputs.append(bundle.generator(layout, latents=latents).data)
    return np.concatenate(outputs)


def evaluate_generator(bundle, dataset, oracle, seed=0):
    """
    Oracle mIoU of generations against their input masks, and spectrum distance to the real pool

    Args:
        bundle (ModelBundle):
        dataset (WorldDataset): test masks are used when present
        oracle (OracleSegmenter):
        seed (int):

    Returns:
        dict: miou, spectrum_distance, confusion (ConfusionMatrix), images (generated array)
    """
    label_maps = dataset.evaluation_label_maps()
    generated = generate_images(bundle, label_maps, seed=seed)
    predicted = oracle.segment(generated)
    score, confusion = miou(predicted, label_maps, dataset.num_classes)
    distance = spectrum_distance(generated, dataset.images)
    logger.info('evaluated generator', extra={'miou': score, 'spectrum_distance': distance, 'masks': len(label_maps)})
    return {
        'miou': score,
        'spectrum_distance': distance,
        'confusion': confusion,
        'images': generated,
    }


def write_report(out_dir, report, dataset=None):
    """
    Writes report.csv (metric,value rows) and, given the dataset, a mask | generation grid
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    df = build_report_df(report)
    df.to_csv(out_dir / REPORT_FILE, index=False)
    if dataset is not None and 'images' in report:
        label_maps = dataset.evaluation_label_maps()[:GRID_ROWS]
        colors = dataset.spec.base_colors
        rows = [[colorize(m, colors), image] for m, image in zip(label_maps, report['images'][:GRID_ROWS])]
        save_grid(out_dir / 'eval_samples.png', rows)
    return df
