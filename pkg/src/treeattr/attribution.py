"""Result containers shared by the exact, fast and baseline explainers."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Attribution:
    """Base value ``phi0`` plus one additive attribution per feature."""

    phi0: float
    phi: np.ndarray
    output: float

    def local_accuracy_error(self) -> float:
        return abs(self.phi0 + float(np.sum(self.phi)) - self.output)

    def check_local_accuracy(self, rtol: float = 1e-6) -> bool:
        return self.local_accuracy_error() <= rtol * max(1.0, abs(self.output))

    def to_dict(self) -> dict:
        return {"phi0": self.phi0, "phi": [float(v) for v in self.phi], "output": self.output}


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Pairwise SHAP interaction values; main effects sit on the diagonal."""

    phi0: float
    values: np.ndarray

    @property
    def phi(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def main_effects(self) -> np.ndarray:
        return np.diag(self.values).copy()

    def asymmetry(self) -> float:
        if self.values.size == 0:
            return 0.0
        return float(np.max(np.abs(self.values - self.values.T)))

    def to_dict(self) -> dict:
        return {"phi0": self.phi0, "interactions": self.values.tolist()}


def dumps_rows(items) -> str:
    return json.dumps([it.to_dict() for it in items])
