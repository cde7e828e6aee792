import numpy as np

from errors import DatasetError

# identity pairings are only rejected for pools larger than this
MIN_POOL_FOR_DERANGEMENT = 4


class UnpairedBatchSampler():
    """
    Draws mask indices and image indices from independent per-epoch shuffles

    Batch b of epoch e is a pure function of (seed, e, b), so a run can resume
    at any step without replaying the stream. Partial batches are dropped.
    """

    def __init__(self, mask_count, image_count, batch_size, seed=0):
        if mask_count < 1 or image_count < 1:
            raise DatasetError('unpaired sampling needs non-empty mask and image pools')
        if batch_size < 1:
            raise DatasetError(f'batch size must be >= 1, got {batch_size}')
        if batch_size > min(mask_count, image_count):
            raise DatasetError(
                f'batch size {batch_size} exceeds pool size (masks {mask_count}, images {image_count})'
            )
        self.mask_count = mask_count
        self.image_count = image_count
        self.batch_size = batch_size
        self.seed = seed
        self.batches_per_epoch = min(mask_count, image_count) // batch_size
        self._cache = {}

    def epoch_indices(self, epoch):
        """
        Returns:
            tuple: (mask permutation, image permutation) for the epoch
        """
        if epoch in self._cache:
            return self._cache[epoch]
        mask_order = np.random.default_rng([self.seed, epoch, 0]).permutation(self.mask_count)
        image_order = np.random.default_rng([self.seed, epoch, 1]).permutation(self.image_count)
        used = self.batches_per_epoch * self.batch_size
        attempt = 0
        while used > MIN_POOL_FOR_DERANGEMENT and np.array_equal(mask_order[:used], image_order[:used]):
            attempt += 1
            image_order = np.random.default_rng([self.seed, epoch, 1, attempt]).permutation(self.image_count)
        self._cache = {epoch: (mask_order, image_order)}
        return mask_order, image_order

    def batch(self, step):
        """
        Index batches for a global step

        Returns:
            tuple: (mask indices, image indices), each of length batch_size
        """
        epoch, position = divmod(step, self.batches_per_epoch)
        mask_order, image_order = self.epoch_indices(epoch)
        window = slice(position * self.batch_size, (position + 1) * self.batch_size)
        return mask_order[window], image_order[window]

    def epoch(self, epoch):
        for position in range(self.batches_per_epoch):
            yield self.batch(epoch * self.batches_per_epoch + position)


def unpaired_batches(masks, images, batch_size, seed=0, epochs=1):
    """
    Yields (mask_batch, image_batch) arrays with independently shuffled indices

    Args:
        masks (np.ndarray): pool of label maps or layouts, indexed on axis 0
        images (np.ndarray): pool of images, indexed on axis 0
        batch_size (int):
        seed (int):
        epochs (int): number of passes over the smaller pool

    Yields:
        tuple: (masks[mask indices], images[image indices])
    """
    sampler = UnpairedBatchSampler(len(masks), len(images), batch_size, seed)
    for epoch in range(epochs):
        for mask_idx, image_idx in sampler.epoch(epoch):
            yield masks[mask_idx], images[image_idx]
