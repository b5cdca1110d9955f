"""Implicit neural CP tensor recovery with variational Schatten-p rank
pruning and stochastic Jacobian smoothness regularization.

Subpackages cover the numerical core (tensor_core, neural_field,
regularizers, optimizer), task drivers (tasks), verification oracles
(verification), deterministic RNG (rng), file formats (io_formats),
synthetic data (data) and the command line (cli).
"""

from .config import TrainConfig
from .data import NoiseSpec, apply_noise, sample_mask, synth_lowrank
from .io_formats import (FileFormatError, read_field, read_points, read_tensor,
                         write_field, write_points, write_tensor)
from .neural_field import FieldParams, field_values, init_params, materialize_grid
from .optimizer import AdamState, TrainingDiverged, adam_step, train
from .regularizers import RegWeights, hutchinson_smoothness, soft_threshold, vsp_norm
from .rng import RngStream
from .tasks import (DenoiseResult, InpaintResult, SdfModel, cp_mass_profile,
                    denoise, inpaint, sdf_train, upsample)
from .tensor_core import (FactorMatrices, ShapeError, chamfer, cp_reconstruct,
                          f_score, nrmse, psnr, schatten_p, singular_values,
                          ssim, unfold)

__version__ = "0.1.0"

__all__ = [
    "TrainConfig", "NoiseSpec", "apply_noise", "sample_mask", "synth_lowrank",
    "FileFormatError", "read_field", "read_points", "read_tensor",
    "write_field", "write_points", "write_tensor",
    "FieldParams", "field_values", "init_params", "materialize_grid",
    "AdamState", "TrainingDiverged", "adam_step", "train",
    "RegWeights", "hutchinson_smoothness", "soft_threshold", "vsp_norm",
    "RngStream",
    "DenoiseResult", "InpaintResult", "SdfModel", "cp_mass_profile",
    "denoise", "inpaint", "sdf_train", "upsample",
    "FactorMatrices", "ShapeError", "chamfer", "cp_reconstruct", "f_score",
    "nrmse", "psnr", "schatten_p", "singular_values", "ssim", "unfold",
    "__version__",
]
