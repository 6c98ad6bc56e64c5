from .ctensor import ComplexScalar, ComplexTensor
from .data import generate_scene, extract_patches, split, SplitSpec, load_raster, save_raster
from .gan import TrainingConfig, train, evaluate_model, PolsarGan
from .checkpoint import save_checkpoint, load_checkpoint
from .sweep import run_label_sweep, summarize_label_sweep
