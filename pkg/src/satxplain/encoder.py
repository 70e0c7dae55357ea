"""Compile a random forest to CNF and pose an instance as Partial Max-SAT.

Variable layout: features take 1..n, tree outputs n+1..n+m, the forest
output n+m+1, Tseitin and counter auxiliaries after that.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .errors import ArityMismatch, ConfigError, HardUnsat
from .formula import FALSE, TRUE, And, Cnf, Const, Formula, Lit, Or, VarPool, encode_card_geq, tseitin
from .solver import solve
from .surrogate import DecisionTree, Instance, RandomForest

NEGATIVE = "neg"
POSITIVE = "pos"


def _path_literal(var_map: Sequence[int], feature: int, value: int) -> int:
    v = var_map[feature]
    return v if value else -v


def tree_to_formula(dt: DecisionTree, var_map: Sequence[int]) -> Formula:
    """Conjunction, over the 0-labelled leaves, of the negated root-to-leaf path."""
    blocked = []
    for path, leaf in sorted(dt.paths(), key=lambda p: p[0]):
        if leaf == 1:
            continue
        if not path:
            return FALSE
        lits = [-_path_literal(var_map, f, val) for f, val in path]
        blocked.append(Lit(lits[0]) if len(lits) == 1 else Or(tuple(Lit(l) for l in lits)))
    if not blocked:
        return TRUE
    return blocked[0] if len(blocked) == 1 else And(tuple(blocked))


@dataclass
class CnfModel:
    cnf: Cnf
    var_map: list[int]
    tree_outputs: list[int]
    forest_output: int
    polarity: str
    feature_names: list[str]
    pool: VarPool = field(repr=False)

    @property
    def target_class(self) -> int:
        """Prediction whose instances are models of ``cnf``."""
        return 1 if self.polarity == NEGATIVE else 0

    def var_map_json(self) -> dict:
        return {
            "polarity": self.polarity,
            "features": {name: v for name, v in zip(self.feature_names, self.var_map)},
            "tree_outputs": list(self.tree_outputs),
            "forest_output": self.forest_output,
            "num_vars": self.cnf.num_vars,
        }


def encode_forest(rf: RandomForest, polarity: str = NEGATIVE, pool: VarPool | None = None,
                  feature_names: Sequence[str] | None = None) -> CnfModel:
    """Hard clauses Σ_f for ``rf``.

    ``neg`` asserts the forest output so that instances predicted 0 clash
    with their own unit clauses; ``pos`` asserts its negation.
    """
    if polarity not in (NEGATIVE, POSITIVE):
        raise ConfigError(f"polarity must be 'neg' or 'pos', got {polarity!r}")
    n = rf.n_features
    names = list(feature_names) if feature_names is not None else [f"X{i + 1}" for i in range(n)]
    if len(names) != n:
        raise ArityMismatch(f"{len(names)} feature names for {n} features")
    pool = pool or VarPool()
    var_map = [pool.id(name) for name in names]
    tree_out = [pool.fresh() for _ in rf.trees]
    y = pool.fresh()

    cnf = Cnf()
    for yi, dt in zip(tree_out, rf.trees):
        f = tree_to_formula(dt, var_map)
        if isinstance(f, Const):
            cnf.append([yi] if f.value else [-yi])
            continue
        clauses, out = tseitin(f, pool)
        cnf.extend(clauses)
        cnf.append([-yi, out])
        cnf.append([yi, -out])
    cnf.extend(encode_card_geq(tree_out, rf.threshold, y, pool))
    cnf.append([y] if polarity == NEGATIVE else [-y])
    cnf.num_vars = max(cnf.num_vars, pool.top)
    return CnfModel(cnf, var_map, tree_out, y, polarity, names, pool)


def encode_instance(x: Instance | Sequence[int], var_map: Sequence[int]) -> list[tuple[int]]:
    values = x.values if isinstance(x, Instance) else tuple(x)
    if not values:
        raise ArityMismatch("cannot encode an empty instance")
    if len(values) != len(var_map):
        raise ArityMismatch(f"instance has {len(values)} values, encoding has {len(var_map)} features")
    return [(v if val else -v,) for v, val in zip(var_map, values)]


@dataclass
class PartialMaxSatInstance:
    hard: Cnf
    soft: list[tuple[int, ...]]
    soft_index: list[tuple[int, int]]  # soft position -> (feature, value in x)

    @property
    def num_vars(self) -> int:
        return max([self.hard.num_vars] + [abs(l) for c in self.soft for l in c])


def build_pmaxsat(cm: CnfModel, soft: list[tuple[int, ...]], check: bool = True) -> PartialMaxSatInstance:
    if check and not solve(cm.cnf.clauses, num_vars=cm.cnf.num_vars).sat:
        raise HardUnsat(f"the forest never predicts class {cm.target_class}; no explanations exist")
    index = []
    feature_of = {v: i for i, v in enumerate(cm.var_map)}
    for clause in soft:
        if len(clause) != 1 or abs(clause[0]) not in feature_of:
            raise ConfigError("soft clauses must be unit clauses over feature variables")
        lit = clause[0]
        index.append((feature_of[abs(lit)], 1 if lit > 0 else 0))
    return PartialMaxSatInstance(cm.cnf, list(soft), index)
