"""Local random-forest surrogates over binary features.

Neighborhood sampling around the instance to explain, labelling through a
black-box oracle, CART-style tree induction (Gini) and majority-vote
forests.
"""

from __future__ import annotations

import math
import shlex
import subprocess
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .errors import (
    ArityMismatch,
    ConfigError,
    EmptyData,
    EmptyNeighborhood,
    OracleExit,
    OracleProtocolError,
)

DEFAULT_TREES = 10
DEFAULT_DEPTH = 24
DEFAULT_SAMPLES = 200


@dataclass(frozen=True)
class Instance:
    values: tuple[int, ...]
    label: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if any(v not in (0, 1) for v in self.values):
            raise ValueError("instance values must be 0/1")

    def __len__(self) -> int:
        return len(self.values)

    def with_label(self, label: int) -> "Instance":
        return Instance(self.values, int(label))


@dataclass
class Dataset:
    feature_names: list[str]
    rows: list[Instance] = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ConfigError("feature names must be unique")
        n = len(self.feature_names)
        for i, row in enumerate(self.rows):
            if len(row) != n:
                raise ArityMismatch(f"row {i} has {len(row)} values, expected {n}")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def hamming(a: Sequence[int], b: Sequence[int]) -> int:
    if len(a) != len(b):
        raise ArityMismatch(f"cannot compare vectors of length {len(a)} and {len(b)}")
    return sum(1 for u, v in zip(a, b) if u != v)


@dataclass
class NeighborhoodSet:
    center: Instance
    radius: int
    members: list[Instance]

    def __len__(self) -> int:
        return len(self.members)

    @property
    def labeled(self) -> bool:
        return all(m.label is not None for m in self.members)


def sample_neighborhood(x: Instance, r: int, dataset: Dataset | None = None, samples: int = 0,
                        seed: int = 0) -> NeighborhoodSet:
    """Collect instances within Hamming radius ``r`` of ``x``.

    Dataset rows within the radius are taken as-is; ``samples`` extra
    distinct instances are drawn by flipping k features of ``x``, with k
    uniform in 1..r.  ``x`` itself is always the first member.
    """
    if r < 0:
        raise ConfigError("radius must be non-negative")
    n = len(x)
    center = Instance(x.values)
    seen = {center.values}
    members = [center]
    if dataset is not None:
        if dataset.n_features != n:
            raise ArityMismatch(f"instance has {n} values, dataset has {dataset.n_features} features")
        for row in dataset.rows:
            if row.values not in seen and hamming(row.values, x.values) <= r:
                seen.add(row.values)
                members.append(Instance(row.values))
    if samples > 0 and r > 0:
        rng = np.random.default_rng(seed)
        radius = min(r, n)
        ball = sum(math.comb(n, k) for k in range(1, radius + 1))
        target = len(members) - 1 + min(samples, ball - (len(members) - 1))
        while len(members) - 1 < target:
            k = int(rng.integers(1, radius + 1))
            flips = rng.choice(n, size=k, replace=False)
            vals = list(x.values)
            for i in flips:
                vals[i] = 1 - vals[i]
            key = tuple(vals)
            if key not in seen:
                seen.add(key)
                members.append(Instance(key))
    if dataset is not None and samples == 0 and r > 0 and len(members) == 1:
        raise EmptyNeighborhood(f"no dataset row within radius {r} of the instance")
    return NeighborhoodSet(center, r, members)


# --- oracles ---------------------------------------------------------------


class Oracle:
    """Black-box labelling interface: one 0/1 label per queried instance."""

    batch_size = 256

    def query(self, batch: list[tuple[int, ...]]) -> list[int]:
        raise NotImplementedError


class FunctionOracle(Oracle):
    def __init__(self, fn: Callable[[tuple[int, ...]], int], batch_size: int = 256):
        self.fn = fn
        self.batch_size = batch_size

    def query(self, batch):
        return [int(self.fn(v)) for v in batch]


class LabelTable(Oracle):
    """Precomputed labels, e.g. the label column of the input CSV."""

    def __init__(self, table: dict[tuple[int, ...], int], batch_size: int = 256):
        self.table = table
        self.batch_size = batch_size

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "LabelTable":
        table = {}
        for i, row in enumerate(dataset.rows):
            if row.label is None:
                raise OracleProtocolError(f"dataset row {i} has no label")
            prev = table.setdefault(row.values, row.label)
            if prev != row.label:
                raise OracleProtocolError(f"dataset row {i} duplicates an instance with a different label")
        return cls(table)

    def query(self, batch):
        out = []
        for v in batch:
            if v not in self.table:
                raise OracleProtocolError("no precomputed label for instance " + "".join(map(str, v)))
            out.append(self.table[v])
        return out


class SubprocessOracle(Oracle):
    """Runs ``command`` once per batch.

    The child reads one comma-separated 0/1 instance per line from stdin
    and must print one ``0`` or ``1`` line per instance, in order.
    """

    def __init__(self, command: Union[str, Sequence[str]], batch_size: int = 256, timeout: float | None = None):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.batch_size = batch_size
        self.timeout = timeout

    def query(self, batch):
        payload = "".join(",".join(map(str, v)) + "\n" for v in batch)
        try:
            proc = subprocess.run(self.argv, input=payload, capture_output=True, text=True,
                                  timeout=self.timeout)
        except FileNotFoundError as exc:
            raise OracleExit(f"oracle command not found: {self.argv[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            raise OracleExit("oracle command timed out") from exc
        if proc.returncode != 0:
            raise OracleExit(f"oracle exited with status {proc.returncode}: {proc.stderr.strip()[:200]}")
        lines = [ln.strip() for ln in proc.stdout.splitlines() if ln.strip()]
        if len(lines) != len(batch):
            raise OracleProtocolError(f"oracle returned {len(lines)} labels for {len(batch)} instances")
        out = []
        for i, ln in enumerate(lines, start=1):
            if ln not in ("0", "1"):
                raise OracleProtocolError(f"oracle output line {i} is not 0/1: {ln!r}")
            out.append(int(ln))
        return out


def label(ns: NeighborhoodSet, oracle: Oracle) -> NeighborhoodSet:
    members = ns.members
    labels: list[int] = []
    step = max(1, oracle.batch_size)
    for start in range(0, len(members), step):
        batch = [m.values for m in members[start:start + step]]
        got = oracle.query(batch)
        if len(got) != len(batch):
            raise OracleProtocolError(f"oracle returned {len(got)} labels for {len(batch)} instances")
        labels.extend(got)
    labeled = [m.with_label(y) for m, y in zip(members, labels)]
    return NeighborhoodSet(labeled[0], ns.radius, labeled)


# --- trees -----------------------------------------------------------------


@dataclass(frozen=True)
class Leaf:
    label: int


@dataclass(frozen=True)
class Split:
    feature: int
    low: "Node"  # branch taken when the feature is 0
    high: "Node"  # branch taken when the feature is 1


Node = Union[Leaf, Split]


@dataclass(frozen=True)
class DecisionTree:
    root: Node
    n_features: int

    def predict(self, values: Sequence[int]) -> int:
        if len(values) != self.n_features:
            raise ArityMismatch(f"expected {self.n_features} values, got {len(values)}")
        node = self.root
        while isinstance(node, Split):
            node = node.high if values[node.feature] else node.low
        return node.label

    def paths(self):
        """Yield (path, leaf label) with path a tuple of (feature, value)."""
        stack = [(self.root, ())]
        while stack:
            node, path = stack.pop()
            if isinstance(node, Leaf):
                yield path, node.label
            else:
                stack.append((node.high, path + ((node.feature, 1),)))
                stack.append((node.low, path + ((node.feature, 0),)))

    def depth(self) -> int:
        return max(len(p) for p, _ in self.paths())

    def features(self) -> set[int]:
        return {f for p, _ in self.paths() for f, _ in p}


def _gini(pos: np.ndarray, tot: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(tot > 0, pos / np.maximum(tot, 1), 0.0)
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def train_tree(X: np.ndarray, y: np.ndarray, max_depth: int = DEFAULT_DEPTH, min_leaf: int = 2,
               rng: np.random.Generator | None = None, max_features: int | None = None,
               tie_label: int = 0) -> DecisionTree:
    """Greedy top-down induction with Gini impurity.

    At each node a random subset of ``max_features`` candidate features
    (default ``ceil(sqrt(n))``) is drawn among those not yet tested on the
    path and not constant on the node's rows.
    """
    X = np.asarray(X, dtype=np.int8)
    y = np.asarray(y, dtype=np.int8)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyData("cannot train a tree on no rows")
    if rng is None:
        rng = np.random.default_rng(0)
    n = X.shape[1]
    k = max_features or max(1, math.ceil(math.sqrt(n)))

    def majority(idx):
        ones = int(y[idx].sum())
        zeros = len(idx) - ones
        if ones == zeros:
            return tie_label
        return 1 if ones > zeros else 0

    def build(idx: np.ndarray, depth: int, used: frozenset) -> Node:
        ys = y[idx]
        if depth >= max_depth or len(idx) < min_leaf or ys.min() == ys.max():
            return Leaf(majority(idx))
        sub = X[idx]
        ones = sub.sum(axis=0)
        candidates = [f for f in range(n) if f not in used and 0 < ones[f] < len(idx)]
        if not candidates:
            return Leaf(majority(idx))
        if len(candidates) > k:
            candidates = sorted(rng.choice(candidates, size=k, replace=False).tolist())
        cand = np.array(candidates)
        hi_tot = ones[cand].astype(float)
        lo_tot = len(idx) - hi_tot
        hi_pos = (sub[:, cand] * ys[:, None]).sum(axis=0).astype(float)
        lo_pos = ys.sum() - hi_pos
        impurity = (hi_tot * _gini(hi_pos, hi_tot) + lo_tot * _gini(lo_pos, lo_tot)) / len(idx)
        best = int(cand[int(np.argmin(impurity))])
        mask = sub[:, best] == 1
        used = used | {best}
        return Split(best, build(idx[~mask], depth + 1, used), build(idx[mask], depth + 1, used))

    return DecisionTree(build(np.arange(len(X)), 0, frozenset()), n)


@dataclass(frozen=True)
class RandomForest:
    trees: tuple[DecisionTree, ...]
    threshold: int

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if not self.trees:
            raise ConfigError("a forest needs at least one tree")
        if not 1 <= self.threshold <= len(self.trees):
            raise ConfigError(f"threshold {self.threshold} outside 1..{len(self.trees)}")
        if len({t.n_features for t in self.trees}) != 1:
            raise ConfigError("trees disagree on the number of features")

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    def votes(self, values: Sequence[int]) -> list[int]:
        return [t.predict(values) for t in self.trees]

    def predict(self, x: Union[Instance, Sequence[int]]) -> int:
        values = x.values if isinstance(x, Instance) else x
        return int(sum(self.votes(values)) >= self.threshold)


def majority_threshold(m: int) -> int:
    return m // 2 + 1


def train_forest(X, y, nb_trees: int = DEFAULT_TREES, max_depth: int = DEFAULT_DEPTH, seed: int = 0,
                 min_leaf: int = 2, bootstrap: bool = True, tie_label: int = 0) -> RandomForest:
    X = np.asarray(X, dtype=np.int8)
    y = np.asarray(y, dtype=np.int8)
    if nb_trees < 1:
        raise ConfigError("nb_trees must be >= 1")
    if X.ndim != 2 or len(X) == 0:
        raise EmptyData("cannot train a forest on no rows")
    trees = []
    for i in range(nb_trees):
        rng = np.random.default_rng([seed, i])
        if bootstrap:
            pick = rng.integers(0, len(X), size=len(X))
            Xi, yi = X[pick], y[pick]
        else:
            Xi, yi = X, y
        trees.append(train_tree(Xi, yi, max_depth=max_depth, min_leaf=min_leaf, rng=rng, tie_label=tie_label))
    return RandomForest(tuple(trees), majority_threshold(nb_trees))


def train_on_neighborhood(ns: NeighborhoodSet, **kwargs) -> RandomForest:
    if not ns.labeled:
        raise ConfigError("neighborhood must be labeled before training")
    X = np.array([m.values for m in ns.members], dtype=np.int8)
    y = np.array([m.label for m in ns.members], dtype=np.int8)
    return train_forest(X, y, **kwargs)


def fidelity(rf: RandomForest, ns: NeighborhoodSet) -> float:
    if not ns.members:
        return 0.0
    if not ns.labeled:
        raise ConfigError("fidelity needs a labeled neighborhood")
    agree = sum(1 for m in ns.members if rf.predict(m.values) == m.label)
    return agree / len(ns.members)


# --- JSON ------------------------------------------------------------------


def _node_to_dict(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": node.label}
    return {"feature": node.feature, "low": _node_to_dict(node.low), "high": _node_to_dict(node.high)}


def _node_from_dict(d: dict, n: int) -> Node:
    if "leaf" in d:
        if d["leaf"] not in (0, 1):
            raise ConfigError(f"leaf label must be 0/1, got {d['leaf']!r}")
        return Leaf(int(d["leaf"]))
    f = int(d["feature"])
    if not 0 <= f < n:
        raise ConfigError(f"feature index {f} out of range 0..{n - 1}")
    return Split(f, _node_from_dict(d["low"], n), _node_from_dict(d["high"], n))


def forest_to_dict(rf: RandomForest, feature_names: Sequence[str] | None = None) -> dict:
    out = {
        "n_features": rf.n_features,
        "threshold": rf.threshold,
        "trees": [_node_to_dict(t.root) for t in rf.trees],
    }
    if feature_names is not None:
        out["feature_names"] = list(feature_names)
    return out


def forest_from_dict(d: dict) -> RandomForest:
    """Inverse of :func:`forest_to_dict`; feature indices are 0-based."""
    try:
        n = int(d["n_features"])
        trees = d["trees"]
        if not trees:
            raise ConfigError("forest file has no trees")
        built = tuple(DecisionTree(_node_from_dict(t, n), n) for t in trees)
        threshold = int(d.get("threshold", majority_threshold(len(built))))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed forest description: {exc}") from exc
    return RandomForest(built, threshold)
