import logging

from collections import OrderedDict

import numpy as np

from errors import CheckpointError
from networks.UNetSegmenter import UNetSegmenter
from networks.WaveletDiscriminator import WaveletDiscriminator
from networks.WaveletGenerator import WaveletGenerator
from tensor_core.AdamOptimizer import Adam

logger = logging.getLogger(__name__)

NETWORKS = ('G', 'D', 'S')


class ModelBundle():
    """
    Generator, discriminator and segmenter with their optimizers and the global step

    Randomness during training is keyed to (seed, step), so the step counter is
    the whole RNG state needed to resume.
    """

    def __init__(self, config, num_classes, step=0):
        self.config = config
        self.num_classes = num_classes
        self.step = step
        rng_g, rng_d, rng_s = [np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(3)]
        self.generator = WaveletGenerator(config.generator_config(num_classes), rng=rng_g)
        self.discriminator = WaveletDiscriminator(config.discriminator_config(), rng=rng_d)
        self.segmenter = UNetSegmenter(config.unet_config(num_classes), rng=rng_s)
        self.opt_g = Adam(self.generator.named_parameters(), lr=config.lr_g, betas=tuple(config.betas_g))
        self.opt_d = Adam(self.discriminator.named_parameters(), lr=config.lr_d, betas=tuple(config.betas_d))
        self.opt_s = Adam(self.segmenter.named_parameters(), lr=config.lr_s, betas=tuple(config.betas_s))
        logger.debug('built models', extra={
            'generator_parameters': self.generator.num_parameters(),
            'discriminator_parameters': self.discriminator.num_parameters(),
            'segmenter_parameters': self.segmenter.num_parameters(),
        })

    @property
    def seed(self):
        return self.config.seed

    def networks(self):
        return dict(zip(NETWORKS, (self.generator, self.discriminator, self.segmenter)))

    def optimizers(self):
        return dict(zip(NETWORKS, (self.opt_g, self.opt_d, self.opt_s)))

    def tensors(self):
        """
        Every persisted array in a fixed order: parameters, then Adam buffers

        Returns:
            OrderedDict: name -> array
        """
        tensors = OrderedDict()
        for prefix, network in self.networks().items():
            for name, value in network.state_dict().items():
                tensors[f'{prefix}.{name}'] = value
        for prefix, optimizer in self.optimizers().items():
            for name, value in optimizer.state.buffers():
                tensors[f'opt_{prefix}.{name}'] = value
        return tensors

    def optimizer_steps(self):
        return {prefix: optimizer.state.step for prefix, optimizer in self.optimizers().items()}

    def load_tensors(self, tensors, optimizer_steps):
        """
        Replaces parameters and optimizer buffers; validates everything before changing anything
        """
        expected = self.tensors()
        for name, value in expected.items():
            if name not in tensors:
                raise CheckpointError(f'checkpoint is missing tensor {name}')
            if tuple(np.shape(tensors[name])) != value.shape:
                raise CheckpointError(
                    f'tensor {name} has shape {tuple(np.shape(tensors[name]))}, model expects {value.shape}'
                )
        for prefix, network in self.networks().items():
            network.load_state_dict({
                name: tensors[f'{prefix}.{name}'] for name, _ in network.named_parameters()
            })
        for prefix, optimizer in self.optimizers().items():
            state = optimizer.state
            for name in state.first_moment:
                state.first_moment[name] = np.array(tensors[f'opt_{prefix}.{name}.m'], dtype=np.float32)
                state.second_moment[name] = np.array(tensors[f'opt_{prefix}.{name}.v'], dtype=np.float32)
            state.step = int(optimizer_steps.get(prefix, 0))
