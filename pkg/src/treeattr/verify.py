"""Randomized comparison of the fast explainers against the brute-force oracle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import oracle, synthetic
from .model import TreeEnsemble, predict
from .treeshap import ensemble_shap, shap_interactions

TOLERANCE = 1e-8


@dataclass
class VerifyReport:
    trials: int = 0
    shap_error: float = 0.0
    interaction_error: float = 0.0
    asymmetry: float = 0.0
    row_sum_error: float = 0.0
    local_accuracy_error: float = 0.0
    worst_trial: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return max(self.errors().values()) <= TOLERANCE

    def errors(self) -> dict:
        return {
            "shap": self.shap_error,
            "interactions": self.interaction_error,
            "asymmetry": self.asymmetry,
            "row_sum": self.row_sum_error,
            "local_accuracy": self.local_accuracy_error,
        }

    def to_dict(self) -> dict:
        return {"trials": self.trials, "passed": self.passed, "tolerance": TOLERANCE,
                "max_abs_error": self.errors(), "worst_trial": self.worst_trial}


def random_case(rng: np.random.Generator, max_features: int, max_depth: int, max_trees: int):
    """One random ensemble and input; some coordinates land exactly on a threshold."""
    M = int(rng.integers(1, max_features + 1))
    T = int(rng.integers(1, max_trees + 1))
    D = int(rng.integers(0, max_depth + 1))
    ens = synthetic.random_ensemble(rng, T, D, M, split_prob=float(rng.uniform(0.5, 1.0)))
    x = rng.uniform(-0.1, 1.1, M)
    thr = np.concatenate([t.thresholds[t.features >= 0] for t in ens.trees])
    if len(thr) and rng.random() < 0.3:
        # ties: x <= threshold goes left
        f = int(rng.integers(M))
        x[f] = thr[rng.integers(len(thr))]
    return ens, x


def check_case(ens: TreeEnsemble, x, backend=None, inject_error: float = 0.0) -> dict:
    fast = ensemble_shap(ens, x, backend=backend)
    phi = fast.phi.copy()
    if inject_error:
        phi[0] += inject_error
    ref = oracle.brute_shap(ens, x)
    inter = shap_interactions(ens, x, backend=backend).values
    ref_inter = oracle.brute_interactions(ens, x).values
    return {
        "shap": float(np.max(np.abs(phi - ref.phi))),
        "interactions": float(np.max(np.abs(inter - ref_inter))),
        "asymmetry": float(np.max(np.abs(inter - inter.T))),
        "row_sum": float(np.max(np.abs(inter.sum(axis=1) - phi))),
        "local_accuracy": float(abs(fast.phi0 + phi.sum() - predict(ens, x)) / max(1.0, abs(predict(ens, x)))),
    }


def run_verify(seed: int = 0, trials: int = 100, max_features: int = 12, max_depth: int = 6,
               max_trees: int = 10, inject_error: float = 0.0, backend=None) -> VerifyReport:
    """Compare fast and brute-force results on ``trials`` random cases.

    ``inject_error`` perturbs the first fast SHAP value and exists only as a
    negative control for the checker itself.
    """
    if trials < 0:
        raise ValueError("trials must be >= 0")
    if max_features < 1 or max_depth < 0 or max_trees < 1:
        raise ValueError("max_features and max_trees must be >= 1, max_depth >= 0")
    if max_features > oracle.DEFAULT_CAP:
        raise oracle.TooManyFeatures(f"max_features {max_features} exceeds the oracle cap {oracle.DEFAULT_CAP}")
    rng = np.random.default_rng(seed)
    report = VerifyReport()
    worst = -1.0
    for trial in range(trials):
        ens, x = random_case(rng, max_features, max_depth, max_trees)
        errs = check_case(ens, x, backend, inject_error)
        report.trials += 1
        report.shap_error = max(report.shap_error, errs["shap"])
        report.interaction_error = max(report.interaction_error, errs["interactions"])
        report.asymmetry = max(report.asymmetry, errs["asymmetry"])
        report.row_sum_error = max(report.row_sum_error, errs["row_sum"])
        report.local_accuracy_error = max(report.local_accuracy_error, errs["local_accuracy"])
        if max(errs.values()) > worst:
            worst = max(errs.values())
            report.worst_trial = {"trial": trial, **ens.stats, "M": ens.num_features, **errs}
    return report
