"""poolbench: a benchmark lab for ensembles of pretrained tabular classifiers."""

from .core import (Dataset, FoldAssignment, SplitIndices, SplitSpec, argmax_labels,
                   assign_folds, check_prob_matrix, check_weights, clip_probs,
                   renormalize_rows, stratified_split)
from .ingest import load_csv_dataset
from .metrics import MetricBundle, compute_bundle
from .synth import make_gaussian_mixture

__version__ = "0.1.0"

__all__ = [
    "Dataset", "FoldAssignment", "SplitIndices", "SplitSpec",
    "argmax_labels", "assign_folds", "check_prob_matrix", "check_weights",
    "clip_probs", "renormalize_rows", "stratified_split",
    "load_csv_dataset", "MetricBundle", "compute_bundle",
    "make_gaussian_mixture", "__version__",
]
