"""Exact SHAP values for tree ensembles in polynomial time.

The fast path tracks, for each unique feature on the current root-to-node
path, what fraction of feature subsets of every size flows into the branch.
Interaction values come from running the same recursion twice per feature
with that feature forced present and forced absent.

Two interchangeable kernels exist: the compiled ``_kernel`` extension and the
pure-Python ``_pure`` module. The compiled one is picked at import when it
was built; pass ``backend="python"`` to force the fallback.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _pure
from .attribution import Attribution, InteractionMatrix
from .model import Dataset, DimensionMismatch, TreeEnsemble, check_x, expected_value, predict
from .oracle import ensemble_exp_value

try:
    from . import _kernel
except ImportError:  # pragma: no cover - exercised only without a build
    _kernel = None

BACKENDS = {"python": _pure}
if _kernel is not None:
    BACKENDS["cython"] = _kernel
DEFAULT_BACKEND = "cython" if _kernel is not None else "python"

PRESENT, ABSENT = 1, -1


class DegenerateElement(ZeroDivisionError):
    """Unwinding a path element whose zero and one fractions are both 0."""


@dataclass(frozen=True)
class PathElement:
    feature: int
    zero_fraction: float
    one_fraction: float
    weight: float


class SubsetPath(tuple):
    """Immutable sequence of :class:`PathElement`; index 0 is the dummy root."""

    @property
    def weights(self) -> np.ndarray:
        return np.array([e.weight for e in self], dtype=np.float64)

    def _columns(self):
        return (
            [e.feature for e in self],
            [e.zero_fraction for e in self],
            [e.one_fraction for e in self],
            [e.weight for e in self],
        )

    @classmethod
    def _from_columns(cls, d, z, o, w):
        return cls(PathElement(int(a), float(b), float(c), float(e)) for a, b, c, e in zip(d, z, o, w))


EMPTY_PATH = SubsetPath()


def extend(path: SubsetPath, p_z: float, p_o: float, p_i: int) -> SubsetPath:
    """Return ``path`` grown by one split with the given zero/one fractions."""
    d, z, o, w = SubsetPath(path)._columns()
    _pure.extend_path(d, z, o, w, p_z, p_o, p_i)
    return SubsetPath._from_columns(d, z, o, w)


def unwind(path: SubsetPath, i: int) -> SubsetPath:
    """Return ``path`` with element ``i`` (0-based) removed and its weights undone."""
    if not 0 <= i < len(path):
        raise IndexError(f"position {i} outside path of length {len(path)}")
    e = path[i]
    if e.one_fraction == 0 and e.zero_fraction == 0:
        raise DegenerateElement(f"element {i} has zero and one fractions both 0")
    d, z, o, w = SubsetPath(path)._columns()
    _pure.unwind_path(d, z, o, w, i)
    return SubsetPath._from_columns(d, z, o, w)


def unwound_weight_sum(path: SubsetPath, i: int) -> float:
    """``sum(unwind(path, i).weights)`` computed without materialising the path."""
    d, z, o, w = SubsetPath(path)._columns()
    return _pure.unwound_sum(z, o, w, i)[0]


def _backend(name):
    name = name or DEFAULT_BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {sorted(BACKENDS)}") from None


def _run(ensemble: TreeEnsemble, x: np.ndarray, backend, condition=0, cond_feature=-1):
    p = ensemble.packed
    phi = np.zeros(ensemble.num_features, dtype=np.float64)
    visits = _backend(backend).ensemble_shap(
        p["values"], p["left"], p["right"], p["thresholds"], p["features"], p["covers"],
        p["offsets"], ensemble.stats["D"], x, phi, condition, cond_feature,
    )
    return phi, visits


def tree_shap(ensemble: TreeEnsemble, x, backend=None) -> tuple[np.ndarray, int]:
    """Raw per-feature SHAP sums over all trees plus the kernel work counter."""
    return _run(ensemble, check_x(ensemble, x), backend)


def ensemble_shap(ensemble: TreeEnsemble, x, backend=None) -> Attribution:
    x = check_x(ensemble, x)
    phi, _ = _run(ensemble, x, backend)
    return Attribution(phi0=expected_value(ensemble), phi=phi, output=predict(ensemble, x))


def conditional_ensemble_shap(ensemble: TreeEnsemble, x, j: int, condition: str, backend=None) -> Attribution:
    """SHAP values of the other features with feature ``j`` fixed present or absent.

    ``phi[j]`` is 0. ``phi0`` is the expectation under the condition and
    ``output`` is the value with every feature but possibly ``j`` known, so
    local accuracy still holds for the conditioned function.
    """
    x = check_x(ensemble, x)
    if not 0 <= j < ensemble.num_features:
        raise IndexError(f"feature {j} outside [0, {ensemble.num_features})")
    code = {"present": PRESENT, "absent": ABSENT}.get(condition)
    if code is None:
        raise ValueError("condition must be 'present' or 'absent'")
    phi, _ = _run(ensemble, x, backend, code, j)
    others = [f for f in range(ensemble.num_features) if f != j]
    if code == PRESENT:
        phi0 = ensemble_exp_value(ensemble, x, [j])
        output = predict(ensemble, x)
    else:
        phi0 = expected_value(ensemble)
        output = ensemble_exp_value(ensemble, x, others)
    return Attribution(phi0=phi0, phi=phi, output=output)


def shap_interactions(ensemble: TreeEnsemble, x, backend=None) -> InteractionMatrix:
    """Pairwise interaction values; the diagonal holds main effects."""
    x = check_x(ensemble, x)
    M = ensemble.num_features
    values = np.zeros((M, M))
    phi, _ = _run(ensemble, x, backend)
    for j in ensemble.used_features():
        on, _ = _run(ensemble, x, backend, PRESENT, j)
        off, _ = _run(ensemble, x, backend, ABSENT, j)
        # column j holds Phi[i, j] for every i; symmetry is checked, never imposed
        values[:, j] = (on - off) / 2.0
        values[j, j] = 0.0
    for i in range(M):
        values[i, i] = phi[i] - values[i].sum()
    return InteractionMatrix(phi0=expected_value(ensemble), values=values)


def batch_explain(ensemble: TreeEnsemble, data: Dataset | np.ndarray, mode: str = "shap",
                  backend=None, threads: int = 1) -> list:
    """Explain every row; output order matches input order."""
    rows = data.rows if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if rows.size == 0:
        return []
    fn = {"shap": ensemble_shap, "interactions": shap_interactions}.get(mode)
    if fn is None:
        raise ValueError("mode must be 'shap' or 'interactions'")

    def one(i):
        try:
            return fn(ensemble, rows[i], backend=backend)
        except DimensionMismatch as e:
            raise DimensionMismatch(f"row {i}: {e}") from None

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(len(rows))))
    return [one(i) for i in range(len(rows))]


def shap_matrix(ensemble: TreeEnsemble, data, backend=None, threads: int = 1) -> np.ndarray:
    """n x M array of SHAP values."""
    res = batch_explain(ensemble, data, "shap", backend, threads)
    if not res:
        return np.zeros((0, ensemble.num_features))
    return np.vstack([r.phi for r in res])
