from evaluation.OracleSegmenter import OracleSegmenter, load_oracle
from evaluation.evaluate import evaluate_generator, generate_images, write_report
from evaluation.metrics import ConfusionMatrix, miou, radial_power_profile, spectrum_distance
