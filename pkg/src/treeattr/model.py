"""Array-encoded tree ensembles: data model, JSON ingestion, prediction.

Trees are stored as parallel per-node arrays with node 0 as the root and
``-1`` as the child/feature sentinel at leaves. A sample goes LEFT when
``x[feature] <= threshold``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

LEAF = -1
DEFAULT_MAX_DEPTH = 64
COVER_RTOL = 1e-9


class ModelError(ValueError):
    """Raised when a model dump is malformed or violates a tree invariant."""

    def __init__(self, message, tree=None, node=None):
        loc = []
        if tree is not None:
            loc.append(f"tree {tree}")
        if node is not None:
            loc.append(f"node {node}")
        prefix = f"[{', '.join(loc)}] " if loc else ""
        super().__init__(prefix + message)
        self.tree = tree
        self.node = node


class MalformedModel(ModelError):
    pass


class IndexOutOfRange(ModelError):
    pass


class CoverMismatch(ModelError):
    pass


class LeafInconsistency(ModelError):
    pass


class DimensionMismatch(ValueError):
    pass


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Tree:
    """One binary regression tree in parallel-array form.

    ``values`` is meaningful only at leaves; ``covers`` holds the (possibly
    fractional) training weight reaching each node.
    """

    values: np.ndarray
    left: np.ndarray
    right: np.ndarray
    thresholds: np.ndarray
    features: np.ndarray
    covers: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, np.float64))
        object.__setattr__(self, "thresholds", _frozen(self.thresholds, np.float64))
        object.__setattr__(self, "covers", _frozen(self.covers, np.float64))
        for name in ("left", "right", "features"):
            object.__setattr__(self, name, _frozen(getattr(self, name), np.int64))

    @property
    def n_nodes(self) -> int:
        return len(self.values)

    def is_leaf(self, j: int) -> bool:
        return self.features[j] == LEAF

    @cached_property
    def depths(self) -> np.ndarray:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for k, level in enumerate(_levels(self)):
            depth[level] = k
        return depth

    @property
    def max_depth(self) -> int:
        return int(self.depths.max())

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.features == LEAF))

    @cached_property
    def node_means(self) -> np.ndarray:
        """Cover-weighted mean of the leaf values below each node."""
        means = np.array(self.values, dtype=np.float64)
        for level in reversed(_levels(self)):
            j = level[self.features[level] != LEAF]
            a, b = self.left[j], self.right[j]
            means[j] = (self.covers[a] * means[a] + self.covers[b] * means[b]) / self.covers[j]
        means.setflags(write=False)
        return means

    def used_features(self) -> set[int]:
        return set(np.unique(self.features[self.features != LEAF]).tolist())

    def leaf_index(self, x) -> int:
        j = 0
        while self.features[j] != LEAF:
            j = self.left[j] if x[self.features[j]] <= self.thresholds[j] else self.right[j]
        return int(j)

    def decision_path(self, x) -> list[int]:
        path = [0]
        j = 0
        while self.features[j] != LEAF:
            j = self.left[j] if x[self.features[j]] <= self.thresholds[j] else self.right[j]
            path.append(int(j))
        return path

    def predict(self, x) -> float:
        return float(self.values[self.leaf_index(x)])

    def expected_value(self) -> float:
        leaves = self.features == LEAF
        return float(np.dot(self.covers[leaves], self.values[leaves]) / self.covers[0])

    def to_dict(self) -> dict:
        return {
            "values": [_num_or_none(v) for v in self.values],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "thresholds": [_num_or_none(v) for v in self.thresholds],
            "features": self.features.tolist(),
            "covers": self.covers.tolist(),
        }


def _num_or_none(v):
    return None if math.isnan(v) else float(v)


def leaf_tree(value: float, cover: float = 1.0) -> Tree:
    return Tree([value], [LEAF], [LEAF], [np.nan], [LEAF], [cover])


@dataclass(frozen=True, eq=False)
class TreeEnsemble:
    """Sum of trees plus a constant offset, in raw margin units."""

    trees: tuple[Tree, ...]
    base_score: float = 0.0
    num_features: int = 0
    feature_names: tuple[str, ...] | None = None
    max_depth_limit: int = DEFAULT_MAX_DEPTH
    stats: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "base_score", float(self.base_score))
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))
        validate_ensemble(self)
        object.__setattr__(
            self,
            "stats",
            {
                "T": len(self.trees),
                "L": max((t.n_leaves for t in self.trees), default=0),
                "D": max((t.max_depth for t in self.trees), default=0),
            },
        )

    @property
    def M(self) -> int:
        return self.num_features

    def names(self) -> list[str]:
        if self.feature_names is not None:
            return list(self.feature_names)
        return [f"f{i}" for i in range(self.num_features)]

    def used_features(self) -> list[int]:
        used = set()
        for t in self.trees:
            used |= t.used_features()
        return sorted(used)

    @cached_property
    def packed(self) -> dict[str, np.ndarray]:
        """Trees concatenated into flat arrays; child indices stay tree-local."""
        offsets = np.zeros(len(self.trees) + 1, dtype=np.intp)
        for i, t in enumerate(self.trees):
            offsets[i + 1] = offsets[i] + t.n_nodes

        def cat(name, dtype):
            if not self.trees:
                return np.zeros(0, dtype=dtype)
            return np.ascontiguousarray(
                np.concatenate([getattr(t, name) for t in self.trees]), dtype=dtype
            )

        return {
            "values": cat("values", np.float64),
            "left": cat("left", np.intp),
            "right": cat("right", np.intp),
            "thresholds": cat("thresholds", np.float64),
            "features": cat("features", np.intp),
            "covers": cat("covers", np.float64),
            "offsets": offsets,
        }

    def to_dict(self) -> dict:
        return {
            "base_score": self.base_score,
            "num_features": self.num_features,
            "feature_names": None if self.feature_names is None else list(self.feature_names),
            "trees": [t.to_dict() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _first(mask) -> int:
    return int(np.flatnonzero(mask)[0])


def _levels(tree: Tree, max_depth=None):
    """Breadth-first levels of node indices from the root (vectorised)."""
    frontier = np.array([0], dtype=np.int64)
    levels = []
    while frontier.size:
        levels.append(frontier)
        if max_depth is not None and len(levels) > max_depth + 1:
            raise MalformedModel(f"tree depth exceeds limit {max_depth}", None, int(frontier[0]))
        inner = frontier[tree.features[frontier] != LEAF]
        frontier = np.concatenate([tree.left[inner], tree.right[inner]])
    return levels


def validate_tree(tree: Tree, num_features: int, tree_index=None, max_depth=DEFAULT_MAX_DEPTH):
    n = tree.n_nodes
    if n == 0:
        raise MalformedModel("tree has no nodes", tree_index)
    for name in ("left", "right", "thresholds", "features", "covers"):
        if len(getattr(tree, name)) != n:
            raise MalformedModel(f"array '{name}' has length {len(getattr(tree, name))}, expected {n}", tree_index)
    f, a, b, cov = tree.features, tree.left, tree.right, tree.covers
    bad = ~np.isfinite(cov) | (cov < 0)
    if bad.any():
        j = _first(bad)
        raise MalformedModel(f"cover must be finite and nonnegative, got {cov[j]}", tree_index, j)
    leaf = f == LEAF
    bad = leaf & ((a != LEAF) | (b != LEAF))
    if bad.any():
        raise LeafInconsistency("leaf has non-sentinel children", tree_index, _first(bad))
    bad = leaf & ~np.isfinite(tree.values)
    if bad.any():
        raise MalformedModel("leaf value must be finite", tree_index, _first(bad))
    inner = ~leaf
    bad = inner & ((f < 0) | (f >= num_features))
    if bad.any():
        j = _first(bad)
        raise IndexOutOfRange(f"feature index {f[j]} outside [0, {num_features})", tree_index, j)
    bad = inner & ((a == LEAF) | (b == LEAF))
    if bad.any():
        raise LeafInconsistency("internal node is missing a child", tree_index, _first(bad))
    bad = inner & ((a < 0) | (a >= n) | (b < 0) | (b >= n))
    if bad.any():
        j = _first(bad)
        raise IndexOutOfRange(f"child index outside [0, {n}): ({a[j]}, {b[j]})", tree_index, j)
    bad = inner & ((a == 0) | (b == 0))
    if bad.any():
        raise MalformedModel("root cannot be a child", tree_index, _first(bad))
    bad = inner & ~np.isfinite(tree.thresholds)
    if bad.any():
        raise MalformedModel("internal node threshold must be finite", tree_index, _first(bad))
    bad = inner & ~(cov > 0)
    if bad.any():
        raise CoverMismatch("internal node cover must be positive", tree_index, _first(bad))
    ai, bi = np.where(inner, a, 0), np.where(inner, b, 0)
    total = cov[ai] + cov[bi]
    bad = inner & (np.abs(total - cov) > COVER_RTOL * np.maximum(np.abs(cov), np.abs(total)))
    if bad.any():
        j = _first(bad)
        raise CoverMismatch(
            f"children covers {cov[a[j]]} + {cov[b[j]]} != parent cover {cov[j]}", tree_index, j
        )
    parents = np.bincount(np.concatenate([a[inner], b[inner]]), minlength=n)
    bad = parents[1:] != 1
    if bad.any():
        j = _first(bad) + 1
        raise MalformedModel(f"node has {parents[j]} parents, expected 1", tree_index, j)
    # one parent per non-root node; any cycle is then unreachable from the root
    try:
        seen = sum(len(level) for level in _levels(tree, max_depth))
    except MalformedModel as e:
        raise MalformedModel(f"tree depth exceeds limit {max_depth}", tree_index, e.node) from None
    if seen != n:
        raise MalformedModel(f"{n - seen} nodes unreachable from the root", tree_index)


def validate_ensemble(ens: TreeEnsemble):
    if ens.num_features < 0:
        raise MalformedModel("num_features must be nonnegative")
    if ens.feature_names is not None and len(ens.feature_names) != ens.num_features:
        raise MalformedModel(
            f"feature_names has {len(ens.feature_names)} entries, expected {ens.num_features}"
        )
    if not math.isfinite(ens.base_score):
        raise MalformedModel("base_score must be finite")
    for i, t in enumerate(ens.trees):
        validate_tree(t, ens.num_features, i, ens.max_depth_limit)


def _float_array(raw, name, tree_index):
    if not isinstance(raw, list):
        raise MalformedModel(f"'{name}' must be an array", tree_index)
    out = []
    for j, v in enumerate(raw):
        if v is None:
            out.append(math.nan)
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            out.append(float(v))
        else:
            raise MalformedModel(f"'{name}' entry is not a number: {v!r}", tree_index, j)
    return out


def _int_array(raw, name, tree_index):
    if not isinstance(raw, list):
        raise MalformedModel(f"'{name}' must be an array", tree_index)
    for j, v in enumerate(raw):
        if isinstance(v, bool) or not isinstance(v, int):
            raise MalformedModel(f"'{name}' entry is not an integer: {v!r}", tree_index, j)
    return raw


def parse_ensemble(document: str | dict, max_depth: int = DEFAULT_MAX_DEPTH) -> TreeEnsemble:
    """Parse and validate a model dump (JSON text or an already-decoded dict)."""
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as e:
            raise MalformedModel(f"invalid JSON: {e}") from None
    else:
        doc = document
    if not isinstance(doc, dict):
        raise MalformedModel("top level must be an object")
    for key in ("num_features", "trees"):
        if key not in doc:
            raise MalformedModel(f"missing key '{key}'")
    num_features = doc["num_features"]
    if isinstance(num_features, bool) or not isinstance(num_features, int):
        raise MalformedModel("'num_features' must be an integer")
    base = doc.get("base_score", 0.0)
    if isinstance(base, bool) or not isinstance(base, (int, float)):
        raise MalformedModel("'base_score' must be a number")
    names = doc.get("feature_names")
    if names is not None and (not isinstance(names, list) or not all(isinstance(s, str) for s in names)):
        raise MalformedModel("'feature_names' must be a list of strings or null")
    if not isinstance(doc["trees"], list):
        raise MalformedModel("'trees' must be an array")
    trees = []
    for i, td in enumerate(doc["trees"]):
        if not isinstance(td, dict):
            raise MalformedModel("tree entry must be an object", i)
        missing = [k for k in ("values", "left", "right", "thresholds", "features", "covers") if k not in td]
        if missing:
            raise MalformedModel(f"missing keys {missing}", i)
        trees.append(
            Tree(
                values=_float_array(td["values"], "values", i),
                left=_int_array(td["left"], "left", i),
                right=_int_array(td["right"], "right", i),
                thresholds=_float_array(td["thresholds"], "thresholds", i),
                features=_int_array(td["features"], "features", i),
                covers=_float_array(td["covers"], "covers", i),
            )
        )
    return TreeEnsemble(trees, float(base), num_features, names, max_depth)


def load_ensemble(path) -> TreeEnsemble:
    return parse_ensemble(Path(path).read_text(encoding="utf-8"))


def check_x(ensemble: TreeEnsemble, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != ensemble.num_features:
        raise DimensionMismatch(f"expected {ensemble.num_features} features, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DimensionMismatch("feature vector contains non-finite values")
    return x


def predict(ensemble: TreeEnsemble, x) -> float:
    x = check_x(ensemble, x)
    total = 0.0
    for t in ensemble.trees:
        total += t.predict(x)
    return ensemble.base_score + total


def predict_batch(ensemble: TreeEnsemble, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.array([predict(ensemble, x) for x in X], dtype=np.float64)


def expected_value(ensemble: TreeEnsemble) -> float:
    return ensemble.base_score + sum(t.expected_value() for t in ensemble.trees)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Rectangular numeric table; one row per sample."""

    rows: np.ndarray
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim == 1 and rows.size == 0:
            rows = rows.reshape(0, 0 if self.column_names is None else len(self.column_names))
        if rows.ndim != 2:
            raise DimensionMismatch(f"dataset must be 2-D, got shape {rows.shape}")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        if self.column_names is not None:
            object.__setattr__(self, "column_names", tuple(self.column_names))
            if len(self.column_names) != rows.shape[1]:
                raise DimensionMismatch("column_names length does not match row width")

    def __len__(self):
        return self.rows.shape[0]

    @property
    def width(self) -> int:
        return self.rows.shape[1]

    def check_width(self, ensemble: TreeEnsemble):
        if len(self) and self.width != ensemble.num_features:
            raise DimensionMismatch(f"dataset has {self.width} columns, model expects {ensemble.num_features}")


def read_dataset(path) -> Dataset:
    """Read a CSV with a header row and numeric cells."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DimensionMismatch(f"{path}: empty CSV (no header)") from None
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DimensionMismatch(f"{path}:{lineno}: expected {len(header)} cells, got {len(rec)}")
            try:
                rows.append([float(c) for c in rec])
            except ValueError as e:
                raise DimensionMismatch(f"{path}:{lineno}: {e}") from None
    arr = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatch(f"{path}: non-finite cells are not supported")
    return Dataset(arr, header)


def write_dataset(path, data: Dataset | np.ndarray, column_names: Sequence[str] | None = None):
    if isinstance(data, Dataset):
        rows, column_names = data.rows, data.column_names
    else:
        rows = np.asarray(data, dtype=np.float64)
    if column_names is None:
        column_names = [f"f{i}" for i in range(rows.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(column_names)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
