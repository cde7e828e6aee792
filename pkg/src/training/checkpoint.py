import json
import logging
import os
import struct

from pathlib import Path

import numpy as np

from errors import CheckpointError
from training.ModelBundle import ModelBundle
from training.config import TrainConfig

logger = logging.getLogger(__name__)

MAGIC = b'USIS'
FORMAT_VERSION = 1
HEADER = struct.Struct('<4sIQ')
PAYLOAD_DTYPE = np.dtype('<f4')


def write_container(path, manifest, tensors):
    """
    Writes tensors to a versioned container

    Layout: magic "USIS", u32 format version, u64 manifest length, UTF-8 JSON
    manifest (the given fields plus tensor names, dtypes and shapes), then the
    tensors as little-endian float32 in manifest order. The file is written next
    to its destination and moved into place.

    Args:
        path (str | Path):
        manifest (dict): JSON-serializable metadata
        tensors (OrderedDict): name -> array
    """
    manifest = dict(manifest)
    manifest['tensors'] = [
        {'name': name, 'dtype': 'float32', 'shape': list(np.shape(value))}
        for name, value in tensors.items()
    ]
    manifest_bytes = json.dumps(manifest).encode('utf-8')

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + '.tmp')
    with open(tmp_path, 'wb') as f:
        f.write(HEADER.pack(MAGIC, FORMAT_VERSION, len(manifest_bytes)))
        f.write(manifest_bytes)
        for value in tensors.values():
            f.write(np.ascontiguousarray(value, dtype=PAYLOAD_DTYPE).tobytes())
    os.replace(tmp_path, path)


def save_checkpoint(path, bundle):
    """
    Writes parameters, Adam buffers, step, seed and config of a bundle

    Args:
        path (str | Path):
        bundle (ModelBundle):
    """
    manifest = {
        'step': bundle.step,
        'num_classes': bundle.num_classes,
        'rng': {'seed': bundle.seed, 'step': bundle.step},
        'optimizer_steps': bundle.optimizer_steps(),
        'variant': bundle.generator.config.variant_name(),
        'config': bundle.config.model_dump(mode='json'),
    }
    write_container(path, manifest, bundle.tensors())
    logger.info('saved checkpoint', extra={'path': str(path), 'step': bundle.step})


def read_checkpoint(path):
    """
    Parses a checkpoint file without building models

    Returns:
        tuple: (manifest dict, dict of name -> float32 array)

    Raises:
        CheckpointError: bad magic, unknown version, truncated or malformed file
    """
    try:
        with open(path, 'rb') as f:
            raw = f.read()
    except OSError as e:
        raise CheckpointError(f'cannot read checkpoint {path}: {e}')
    if len(raw) < HEADER.size:
        raise CheckpointError(f'checkpoint {path} is truncated (no header)')
    magic, version, manifest_length = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f'{path} is not a checkpoint (magic {magic!r})')
    if version != FORMAT_VERSION:
        raise CheckpointError(f'checkpoint {path} has format version {version}, expected {FORMAT_VERSION}')
    start = HEADER.size
    if len(raw) < start + manifest_length:
        raise CheckpointError(f'checkpoint {path} is truncated (manifest)')
    try:
        manifest = json.loads(raw[start:start + manifest_length].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f'checkpoint {path} has a malformed manifest: {e}')

    offset = start + manifest_length
    tensors = {}
    for entry in manifest.get('tensors', []):
        if entry.get('dtype') != 'float32':
            raise CheckpointError(f'tensor {entry.get("name")} has unsupported dtype {entry.get("dtype")}')
        shape = tuple(entry['shape'])
        nbytes = int(np.prod(shape, dtype=np.int64)) * PAYLOAD_DTYPE.itemsize
        if len(raw) < offset + nbytes:
            raise CheckpointError(f'checkpoint {path} is truncated at tensor {entry["name"]}')
        tensors[entry['name']] = np.frombuffer(raw, dtype=PAYLOAD_DTYPE, count=nbytes // 4, offset=offset).reshape(shape).astype(np.float32)
        offset += nbytes
    if offset != len(raw):
        raise CheckpointError(f'checkpoint {path} has {len(raw) - offset} trailing bytes')
    return manifest, tensors


def load_checkpoint(path, config=None):
    """
    Rebuilds a bundle from a checkpoint

    Args:
        path (str | Path):
        config (TrainConfig, optional): run options to use instead of the stored ones;
            its architecture fields must equal the stored ones

    Returns:
        ModelBundle: fully loaded; nothing is returned when validation fails
    """
    manifest, tensors = read_checkpoint(path)
    try:
        stored = TrainConfig.model_validate(manifest['config'])
        config = config or stored
        trained, requested = stored.architecture(), config.architecture()
        for name, value in trained.items():
            if requested[name] != value:
                raise CheckpointError(f'checkpoint {path} was trained with {name}={value}, the run asks for {requested[name]}')
        bundle = ModelBundle(config, int(manifest['num_classes']), step=int(manifest['step']))
    except (KeyError, ValueError) as e:
        raise CheckpointError(f'checkpoint {path} has an invalid manifest: {e}')
    bundle.load_tensors(tensors, manifest.get('optimizer_steps', {}))
    logger.info('loaded checkpoint', extra={'path': str(path), 'step': bundle.step})
    return bundle
