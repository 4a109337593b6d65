"""Synthetic data, evaluation protocols, the ten-method matrix and reports."""

from .methods import (METHODS, PCA, RAW, FitAudit, HyperParams, MethodSpec, StackCache, method_spec,
                      parse_methods, run_method)
from .protocols import PAPER_FRACTIONS, cv_accuracies, fivefold_cv, prefix_split, stratified_folds
from .report import (PAPER_STRUCTURES, REDUCED_HYPER, REDUCED_SUBJECTS, check_trends, default_reproduce_config,
                     render_markdown, reproduce_table, series_csv, sweep_structures)
from .synth import SubjectSession, SynthConfig, generate_subject, generate_synthetic, session_features, synthetic_dataset

__all__ = [
    "METHODS", "PCA", "RAW", "FitAudit", "HyperParams", "MethodSpec", "StackCache", "method_spec",
    "parse_methods", "run_method", "PAPER_FRACTIONS", "cv_accuracies", "fivefold_cv", "prefix_split",
    "stratified_folds", "PAPER_STRUCTURES", "REDUCED_HYPER", "REDUCED_SUBJECTS", "check_trends",
    "default_reproduce_config", "render_markdown", "reproduce_table", "series_csv", "sweep_structures",
    "SubjectSession", "SynthConfig", "generate_subject", "generate_synthetic", "session_features",
    "synthetic_dataset",
]
