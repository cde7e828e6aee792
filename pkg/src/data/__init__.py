from data.ShapesWorld import ClassAppearance, ShapesWorldSpec, WorldSample, class_frequencies, generate_world, render_sample
from data.batches import UnpairedBatchSampler, unpaired_batches
from data.dataset_files import WorldDataset, list_filepaths, load_dataset, write_dataset
from data.labels import argmax_labels, one_hot
from data.png_io import read_image_png, read_label_png, write_image_png, write_label_png
