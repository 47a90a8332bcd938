"""Kernel and particle consistency laboratory for 2D SPH."""

import os

import numba

if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ and "NUMBA_THREADING_LAYER" not in os.environ:
    # probe OpenMP before TBB; an outdated TBB only produces a warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

from .kernels import CUBIC_SPLINE, WENDLAND_C4, SmoothingKernel, kernel_derivatives, kernel_value
from .particles import ParticleSet, build_neighbor_list, generate_irregular, generate_regular
from .schemes import SchemeConfig, SchemeEstimate, Variant, smoothing_length_for
from .experiments import Distribution, StudyResult, run_studies, run_study

__version__ = "0.1.0"

__all__ = [
    "CUBIC_SPLINE", "WENDLAND_C4", "SmoothingKernel", "kernel_value", "kernel_derivatives",
    "ParticleSet", "generate_regular", "generate_irregular", "build_neighbor_list",
    "SchemeConfig", "SchemeEstimate", "Variant", "smoothing_length_for",
    "Distribution", "StudyResult", "run_study", "run_studies",
]
