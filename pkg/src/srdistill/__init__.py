"""Noise-guided dataset distillation and exclusionary-loss toolkit for real-world super-resolution."""

__version__ = "0.1.0"

from ._backend import NAME as BACKEND
from .imageio import load_image, save_image, to_luma
from .noisebank import Cati, NoiseBank, build_bank, compute_cati, inject_noise, sample_noise
from .patching import Patch, PatchStats, extract_patch_grid, patch_stats
from .pipeline import distill, emit_pairs
from .resample import bicubic_resize, degrade_pair
