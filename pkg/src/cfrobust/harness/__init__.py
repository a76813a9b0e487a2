"""Experiment pipeline and command-line interface."""

from .data import BlobsSpec, kfold_indices, load_csv, make_blobs
from .experiment import (
    ExperimentConfig,
    FittedPipeline,
    bound_violations,
    fit_pipeline,
    run_dimensionality_study,
    run_experiment,
    tail_check,
    theory_check,
)

__all__ = [
    "BlobsSpec",
    "ExperimentConfig",
    "FittedPipeline",
    "bound_violations",
    "fit_pipeline",
    "kfold_indices",
    "load_csv",
    "make_blobs",
    "run_dimensionality_study",
    "run_experiment",
    "tail_check",
    "theory_check",
]
