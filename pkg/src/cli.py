import argparse
import logging
import pathlib
import sys

import numpy as np
import pandas as pd

from data.ShapesWorld import ShapesWorldSpec, class_frequencies, generate_world
from data.dataset_files import load_dataset, write_dataset
from data.labels import one_hot
from data.png_io import read_image_png, read_label_png, write_image_png
from errors import WavegenError
from evaluation.OracleSegmenter import load_oracle
from evaluation.evaluate import evaluate_generator, write_report
from log_setup import configure_logging
from networks.SemanticLayout import sample_latents
from results_builder import build_ablation_df
from settings import merge_options, read_flat_config
from tensor_core.Tensor import Tensor
from training.checkpoint import load_checkpoint, read_checkpoint
from training.config import VARIANTS, TrainConfig
from training.trainer import fit
from visualize import approximation_to_uint8, detail_to_uint8, save_grid, save_subband, spatial_pyramid
from wavelet.haar import SUBBANDS, wavedec
from wavelet.WaveletFeatures import Arrangement

logger = logging.getLogger('cli')

TRAIN_FLAGS = ('steps', 'lambda_adv', 'z_dim', 'batch', 'seed', 'checkpoint_every', 'sample_every',
               'use_wavelet_upsample', 'use_pixel_spade', 'arrangement', 'final_iwt', 'r1_gamma')


def parse_size(value):
    """
    Parses 'HxW' into (H, W)
    """
    try:
        height, width = (int(part) for part in value.lower().split('x'))
    except ValueError:
        raise argparse.ArgumentTypeError(f'size must look like 64x64, got {value!r}')
    return height, width


def _config_values(args):
    return read_flat_config(args.config) if getattr(args, 'config', None) else {}


def train_config_from_args(args, overrides=None, defaults=None):
    """
    Flags win over --config values, which win over `defaults`, then TrainConfig defaults
    """
    flags = {name: getattr(args, name, None) for name in TRAIN_FLAGS}
    if getattr(args, 'final_iwt_only', False):
        flags['use_wavelet_upsample'] = False
        flags['use_pixel_spade'] = False
    values = merge_options(flags, _config_values(args), defaults=defaults)
    values.update(overrides or {})
    known = {k: v for k, v in values.items() if k in TrainConfig.model_fields}
    return TrainConfig(**known)


def cmd_generate_data(args):
    flags = {
        'num_classes': args.classes,
        'seed': args.seed,
        'count': args.count,
        'test_count': args.test_count,
    }
    if args.size is not None:
        flags['height'], flags['width'] = args.size
    config_values = _config_values(args)
    if 'size' in config_values:
        try:
            config_values['height'], config_values['width'] = parse_size(config_values.pop('size'))
        except argparse.ArgumentTypeError as e:
            raise WavegenError(f'{args.config}: {e}')
    unknown = sorted(set(config_values) - set(ShapesWorldSpec.model_fields) - {'count', 'test_count'})
    if unknown:
        raise WavegenError(f'{args.config} has options generate-data does not know: {", ".join(unknown)}')
    values = merge_options(flags, config_values, defaults={'count': 512, 'test_count': 0})
    count, test_count = int(values.pop('count')), int(values.pop('test_count'))
    spec = ShapesWorldSpec(**{k: v for k, v in values.items() if k in ShapesWorldSpec.model_fields})

    samples = generate_world(spec, count)
    test_samples = generate_world(spec, test_count, start=count) if test_count > 0 else None
    write_dataset(args.out, spec, samples, test_samples)

    frequencies = class_frequencies(np.stack([s.label_map for s in samples]), spec.num_classes)
    summary = pd.DataFrame({'class': np.arange(spec.num_classes), 'pixel_fraction': frequencies})
    print(summary.to_string(index=False))
    return 0


def cmd_train(args):
    defaults = None
    if args.resume:
        # architecture not given on the command line is taken from the checkpoint
        manifest, _ = read_checkpoint(args.resume)
        defaults = TrainConfig.model_validate(manifest.get('config', {})).architecture()
    config = train_config_from_args(args, defaults=defaults)
    dataset = load_dataset(args.data)
    bundle = load_checkpoint(args.resume, config) if args.resume else None
    bundle, history = fit(config, dataset, out_dir=args.out, bundle=bundle, progress=not args.log_json)
    logger.info('training finished', extra={'step': bundle.step, 'records': len(history)})
    return 0


def cmd_eval(args):
    bundle = load_checkpoint(args.ckpt)
    dataset = load_dataset(args.data)
    if bundle.num_classes != dataset.num_classes:
        raise WavegenError(f'checkpoint has {bundle.num_classes} classes, dataset has {dataset.num_classes}')
    oracle = load_oracle(args.oracle, dataset.spec, dataset_dir=args.data, seed=args.seed or 0)
    report = evaluate_generator(bundle, dataset, oracle, seed=args.seed or 0)
    df = write_report(args.out, report, dataset)
    print(df.to_string(index=False))
    return 0


def cmd_dwt(args):
    image = read_image_png(args.input)
    x = Tensor(image[None], dtype=np.float64)
    decomposition = wavedec(x, args.levels)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    arrays = {}
    for level, bands in enumerate(decomposition, start=1):
        for name in SUBBANDS[1:]:
            save_subband(out / f'{name}{level}.png', detail_to_uint8(bands[name][0]))
            arrays[f'{name}{level}'] = bands[name][0]
    coarsest = decomposition[-1]['LL'][0]
    save_subband(out / f'LL{args.levels}.png', approximation_to_uint8(coarsest, args.levels))
    arrays[f'LL{args.levels}'] = coarsest
    np.savez(out / 'coefficients.npz', **arrays)
    if args.spatial:
        save_subband(out / 'spatial.png', spatial_pyramid([{k: v[0] for k, v in bands.items()} for bands in decomposition]))
    logger.info('wrote subbands', extra={'path': str(out), 'levels': args.levels})
    return 0


def cmd_sample(args):
    bundle = load_checkpoint(args.ckpt)
    label_map = read_label_png(args.mask, bundle.num_classes)
    layout = one_hot(np.repeat(label_map[None], args.count, axis=0), bundle.num_classes)
    latents = sample_latents(args.count, bundle.config.z_dim, args.seed or 0)
    images = bundle.generator(layout, latents=latents).data

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, image in enumerate(images):
        write_image_png(out / f'sample_{i:03d}.png', image)
    save_grid(out / 'grid.png', [list(images)])
    logger.info('wrote samples', extra={'path': str(out), 'count': args.count})
    return 0


def cmd_ablation(args):
    dataset = load_dataset(args.data)
    oracle = load_oracle(args.oracle, dataset.spec, dataset_dir=args.data, seed=args.seed or 0)
    out = pathlib.Path(args.out)
    results = {}
    for variant in args.variants:
        config = train_config_from_args(args, overrides=VARIANTS[variant])
        bundle, _ = fit(config, dataset, out_dir=out / variant, progress=not args.log_json)
        results[variant] = evaluate_generator(bundle, dataset, oracle, seed=config.seed)
        logger.info('ablation variant done', extra={'variant': variant, 'miou': results[variant]['miou']})
    df = build_ablation_df(results)
    out.mkdir(parents=True, exist_ok=True)
    df.to_csv(out / 'ablation.csv', index=False)
    print(df.to_string(index=False))
    return 0


def _add_common(parser):
    parser.add_argument('--config', type=pathlib.Path, help='flat key = value file, flags win on conflict')
    parser.add_argument('--seed', type=int, help='random seed')
    parser.add_argument('--log-json', action='store_true', help='emit JSON log records')
    parser.add_argument('--log-level', default='INFO', help='logging level')


def _add_training_options(parser):
    parser.add_argument('--data', type=pathlib.Path, required=True, help='dataset directory')
    parser.add_argument('--out', type=pathlib.Path, required=True, help='output directory')
    parser.add_argument('--steps', type=int, help='training steps')
    parser.add_argument('--lambda', dest='lambda_adv', type=float, help='adversarial loss weight')
    parser.add_argument('--z-dim', dest='z_dim', type=int, help='latent dimension')
    parser.add_argument('--batch', type=int, help='batch size')
    parser.add_argument('--r1-gamma', dest='r1_gamma', type=float, help='R1 penalty weight')
    parser.add_argument('--checkpoint-every', dest='checkpoint_every', type=int, help='steps between checkpoints')
    parser.add_argument('--sample-every', dest='sample_every', type=int, help='steps between sample grids')


def build_parser():
    parser = argparse.ArgumentParser(
        description='Unpaired semantic image synthesis in the wavelet domain'
    )
    commands = parser.add_subparsers(dest='command', required=True)

    generate = commands.add_parser('generate-data', help='render a synthetic textured-shapes dataset')
    generate.add_argument('--out', type=pathlib.Path, required=True, help='dataset directory')
    generate.add_argument('--classes', type=int, help='number of classes, background included')
    generate.add_argument('--size', type=parse_size, help='image size HxW')
    generate.add_argument('--count', type=int, help='number of mask/image pairs')
    generate.add_argument('--test-count', dest='test_count', type=int, help='held-out masks and images')
    _add_common(generate)
    generate.set_defaults(handler=cmd_generate_data)

    train = commands.add_parser('train', help='train generator, discriminator and segmenter')
    _add_training_options(train)
    train.add_argument('--no-wu', dest='use_wavelet_upsample', action='store_const', const=False,
                       help='nearest upsampling on the identity branch')
    train.add_argument('--no-ps', dest='use_pixel_spade', action='store_const', const=False,
                       help='SPADE on coefficients instead of pixelSPADE')
    train.add_argument('--spatial', dest='arrangement', action='store_const', const=Arrangement.SPATIAL,
                       help='tile subbands spatially instead of stacking them on channels')
    train.add_argument('--final-iwt-only', dest='final_iwt_only', action='store_true',
                       help='wavelet generator without waveletUpsample and pixelSPADE')
    train.add_argument('--no-iwt', dest='final_iwt', action='store_const', const=False,
                       help='plain spatial SPADE generator')
    train.add_argument('--resume', type=pathlib.Path, help='checkpoint to continue from')
    _add_common(train)
    train.set_defaults(handler=cmd_train)

    evaluate = commands.add_parser('eval', help='oracle mIoU and spectrum distance of a checkpoint')
    evaluate.add_argument('--data', type=pathlib.Path, required=True, help='dataset directory')
    evaluate.add_argument('--ckpt', type=pathlib.Path, required=True, help='checkpoint file')
    evaluate.add_argument('--out', type=pathlib.Path, required=True, help='output directory')
    evaluate.add_argument('--oracle', choices=['color', 'unet'], default='color', help='oracle segmenter')
    _add_common(evaluate)
    evaluate.set_defaults(handler=cmd_eval)

    dwt = commands.add_parser('dwt', help='write Haar subbands of an image')
    dwt.add_argument('--in', dest='input', type=pathlib.Path, required=True, help='RGB PNG')
    dwt.add_argument('--out', type=pathlib.Path, required=True, help='output directory')
    dwt.add_argument('--levels', type=int, default=1, help='decomposition levels')
    dwt.add_argument('--spatial', action='store_true', help='also write the spatial arrangement mosaic')
    _add_common(dwt)
    dwt.set_defaults(handler=cmd_dwt)

    sample = commands.add_parser('sample', help='generate several images from one mask')
    sample.add_argument('--ckpt', type=pathlib.Path, required=True, help='checkpoint file')
    sample.add_argument('--mask', type=pathlib.Path, required=True, help='grayscale label PNG')
    sample.add_argument('--count', type=int, default=4, help='number of generations')
    sample.add_argument('--out', type=pathlib.Path, required=True, help='output directory')
    _add_common(sample)
    sample.set_defaults(handler=cmd_sample)

    ablation = commands.add_parser('ablation', help='train and evaluate every architecture variant')
    _add_training_options(ablation)
    ablation.add_argument('--variants', nargs='+', choices=list(VARIANTS), default=list(VARIANTS),
                          help='variants to run')
    ablation.add_argument('--oracle', choices=['color', 'unet'], default='color', help='oracle segmenter')
    _add_common(ablation)
    ablation.set_defaults(handler=cmd_ablation)
    return parser


def main(argv=None):
    """
    Runs one command

    Returns:
        int: 0 on success, 1 with a one-line cause on failure
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level, json_output=args.log_json)
    try:
        return args.handler(args)
    except (WavegenError, OSError, ValueError) as e:
        message = str(e).splitlines()[0] if str(e) else type(e).__name__
        logger.error(message)
        print(f'error: {message}', file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
