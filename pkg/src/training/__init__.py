from training.ModelBundle import ModelBundle
from training.checkpoint import load_checkpoint, read_checkpoint, save_checkpoint, write_container
from training.config import VARIANTS, TrainConfig
from training.trainer import fit, real_image_batch, train_step
