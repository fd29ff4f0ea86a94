"""Plot-ready tables for summary, dependence and interaction dependence plots.

Only data is produced; rendering is left to whatever plotting tool reads the
CSV files. Floats are written with ``repr`` (shortest round-trip form).
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .model import Dataset

SUMMARY_HEADER = ("feature", "rank", "row", "phi", "value", "color")
DEPENDENCE_HEADER = ("row", "x", "phi", "color")
MAIN_HEADER = ("row", "x", "main")
INTERACTION_HEADER = ("row", "x", "interaction", "color")

AUTO_COLOR_ROWS = 500


def _rows(data) -> np.ndarray:
    return data.rows if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)


def global_order(attribs) -> np.ndarray:
    """Feature indices by descending sum |phi|; equal sums keep index order."""
    A = np.asarray(attribs, dtype=np.float64)
    impact = np.abs(A).sum(axis=0)
    return np.lexsort((np.arange(A.shape[1]), -impact))


def normalized_colors(values) -> np.ndarray:
    """Min-max scale each column to [0, 1]; constant columns map to 0.5."""
    V = np.asarray(values, dtype=np.float64)
    lo, hi = V.min(axis=0), V.max(axis=0)
    span = hi - lo
    out = np.full(V.shape, 0.5)
    ok = span > 0
    out[:, ok] = (V[:, ok] - lo[ok]) / span[ok]
    return out


def summary_plot_data(attribs, data, feature_names=None, drop_unused: bool = False) -> list[tuple]:
    """One record per (row, feature), ordered by feature rank then row."""
    A = np.asarray(attribs, dtype=np.float64)
    X = _rows(data)
    if A.shape != X.shape:
        raise ValueError(f"attribution shape {A.shape} does not match data shape {X.shape}")
    n, M = A.shape
    if n == 0:
        return []
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(M)]
    colors = normalized_colors(X)
    records = []
    rank = 0
    for f in global_order(A):
        if drop_unused and not np.any(A[:, f]):
            continue
        for r in range(n):
            records.append((names[f], rank, r, float(A[r, f]), float(X[r, f]), float(colors[r, f])))
        rank += 1
    return records


def pick_color_feature(i: int, interactions, max_rows: int = AUTO_COLOR_ROWS):
    """Feature with the largest summed |interaction| with ``i`` over the first rows."""
    Phi = np.asarray(interactions, dtype=np.float64)[:max_rows]
    M = Phi.shape[-1]
    if M < 2:
        return None
    strength = np.abs(Phi[:, i, :]).sum(axis=0)
    strength[i] = -np.inf
    return int(np.argmax(strength))


def dependence_plot_data(i: int, attribs, data, color_feature=None, interactions=None,
                         max_rows: int = AUTO_COLOR_ROWS):
    """(row, x_i, phi_i, x_k) records; ``k`` is chosen from interactions when omitted.

    Returns ``(records, k)``.
    """
    A = np.asarray(attribs, dtype=np.float64)
    X = _rows(data)
    k = color_feature
    if k is None and interactions is not None:
        k = pick_color_feature(i, interactions, max_rows)
    records = [
        (r, float(X[r, i]), float(A[r, i]), float(X[r, k]) if k is not None else float("nan"))
        for r in range(len(X))
    ]
    return records, k


def interaction_dependence_data(i: int, j: int, data, interactions):
    """Main-effect records ``(row, x_i, Phi_ii)`` and ``(row, x_i, Phi_ij, x_j)``."""
    X = _rows(data)
    Phi = np.asarray(interactions, dtype=np.float64)
    if i == j:
        raise ValueError("interaction dependence needs two different features")
    main = [(r, float(X[r, i]), float(Phi[r, i, i])) for r in range(len(X))]
    inter = [(r, float(X[r, i]), float(Phi[r, i, j]), float(X[r, j])) for r in range(len(X))]
    return main, inter


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def records_to_csv(header, records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for rec in records:
        w.writerow([_cell(v) for v in rec])
    return buf.getvalue()


def write_records(path, header, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(records_to_csv(header, records))


def read_records(path_or_text, types) -> list[tuple]:
    """Parse a CSV written by :func:`write_records` back into typed tuples."""
    text = path_or_text
    if not isinstance(text, str) or "\n" not in text:
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    next(reader)
    return [tuple(t(c) for t, c in zip(types, rec)) for rec in reader if rec]
