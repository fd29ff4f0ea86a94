"""Exact additive feature attributions for tree ensembles."""

from .attribution import Attribution, InteractionMatrix
from .model import Dataset, Tree, TreeEnsemble, expected_value, load_ensemble, parse_ensemble, predict
from .treeshap import (
    BACKENDS,
    DEFAULT_BACKEND,
    batch_explain,
    conditional_ensemble_shap,
    ensemble_shap,
    shap_interactions,
    tree_shap,
)

__version__ = "0.1.0"

__all__ = [
    "Attribution",
    "BACKENDS",
    "DEFAULT_BACKEND",
    "Dataset",
    "InteractionMatrix",
    "Tree",
    "TreeEnsemble",
    "batch_explain",
    "conditional_ensemble_shap",
    "ensemble_shap",
    "expected_value",
    "load_ensemble",
    "parse_ensemble",
    "predict",
    "shap_interactions",
    "tree_shap",
]
