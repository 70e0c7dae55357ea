"""Propositional formulas, CNF containers, Tseitin conversion and a
cardinality encoder.

Variables are positive integers and literals are signed integers, the
usual DIMACS convention: ``-v`` is the negation of ``v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

from .errors import InvalidThreshold, MissingAssignment


def neg(lit: int) -> int:
    return -lit


class VarPool:
    """Allocates fresh variable indices.

    Named variables (typically the input features) are registered first
    so that they occupy the lowest indices.
    """

    def __init__(self, start: int = 1):
        self.next_index = start
        self.name_to_var: dict[str, int] = {}
        self.var_to_name: dict[int, str] = {}

    @property
    def top(self) -> int:
        return self.next_index - 1

    def fresh(self) -> int:
        v = self.next_index
        self.next_index += 1
        return v

    def id(self, name: str) -> int:
        if name not in self.name_to_var:
            v = self.fresh()
            self.name_to_var[name] = v
            self.var_to_name[v] = name
        return self.name_to_var[name]

    def name(self, var: int) -> str | None:
        return self.var_to_name.get(abs(var))


# --- formula AST -----------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Lit:
    lit: int

    def __post_init__(self):
        if self.lit == 0:
            raise ValueError("literal 0 is reserved")


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    children: tuple

    def __post_init__(self):
        if not self.children:
            raise ValueError("And needs at least one child")


@dataclass(frozen=True)
class Or:
    children: tuple

    def __post_init__(self):
        if not self.children:
            raise ValueError("Or needs at least one child")


Formula = Union[Const, Lit, Not, And, Or]

TRUE = Const(True)
FALSE = Const(False)


def conj(*children: Formula) -> Formula:
    return And(tuple(children))


def disj(*children: Formula) -> Formula:
    return Or(tuple(children))


def variables(f: Formula) -> set[int]:
    out: set[int] = set()
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Lit):
            out.add(abs(node.lit))
        elif isinstance(node, Not):
            stack.append(node.child)
        elif isinstance(node, (And, Or)):
            stack.extend(node.children)
    return out


def evaluate(f: Formula, assignment: Mapping[int, int]) -> int:
    """Truth value (0/1) of ``f`` under a total assignment var -> {0, 1}."""
    if isinstance(f, Const):
        return int(f.value)
    if isinstance(f, Lit):
        v = abs(f.lit)
        if v not in assignment:
            raise MissingAssignment(f"variable {v} is unassigned")
        value = 1 if assignment[v] else 0
        return value if f.lit > 0 else 1 - value
    if isinstance(f, Not):
        return 1 - evaluate(f.child, assignment)
    if isinstance(f, And):
        # evaluate every child so that missing variables are always reported
        values = [evaluate(c, assignment) for c in f.children]
        return int(all(values))
    if isinstance(f, Or):
        values = [evaluate(c, assignment) for c in f.children]
        return int(any(values))
    raise TypeError(f"not a formula node: {f!r}")


# --- CNF -------------------------------------------------------------------


def normalize_clause(lits: Iterable[int]) -> tuple[int, ...] | None:
    """Merge duplicate literals; ``None`` for a tautology."""
    seen = set()
    out = []
    for lit in lits:
        if lit == 0:
            raise ValueError("literal 0 is reserved")
        if -lit in seen:
            return None
        if lit not in seen:
            seen.add(lit)
            out.append(lit)
    return tuple(out)


@dataclass
class Cnf:
    clauses: list[tuple[int, ...]] = field(default_factory=list)
    num_vars: int = 0

    def __post_init__(self):
        clauses, self.clauses = self.clauses, []
        self._seen: set[frozenset] = set()
        self.extend(clauses)

    def append(self, lits: Iterable[int]) -> None:
        clause = normalize_clause(lits)
        if clause is None:
            return
        key = frozenset(clause)
        if key in self._seen:
            return
        self._seen.add(key)
        self.clauses.append(clause)
        for lit in clause:
            if abs(lit) > self.num_vars:
                self.num_vars = abs(lit)

    def extend(self, clauses: Iterable[Iterable[int]]) -> None:
        for c in clauses:
            self.append(c)

    def copy(self) -> "Cnf":
        return Cnf(list(self.clauses), self.num_vars)

    def __len__(self) -> int:
        return len(self.clauses)

    def __iter__(self):
        return iter(self.clauses)

    def as_sets(self) -> set[frozenset]:
        return {frozenset(c) for c in self.clauses}

    def satisfied_by(self, assignment: Mapping[int, int]) -> bool:
        for clause in self.clauses:
            if not any((assignment[abs(l)] == 1) == (l > 0) for l in clause):
                return False
        return True


# --- Tseitin ---------------------------------------------------------------


def tseitin(f: Formula, pool: VarPool) -> tuple[Cnf, int]:
    """Tseitin-encode ``f``.

    Returns ``(cnf, out)`` where every internal And/Or node gets a fresh
    variable tied to its children by both implication directions, so
    ``out`` is equivalent to ``f`` in every model of ``cnf``.  Leaves pass
    through unchanged and negation flips the child literal.
    """
    cnf = Cnf()
    cache: dict[Formula, int] = {}

    def visit(node: Formula) -> int:
        if node in cache:
            return cache[node]
        if isinstance(node, Lit):
            out = node.lit
        elif isinstance(node, Not):
            out = -visit(node.child)
        elif isinstance(node, Const):
            out = pool.fresh()
            cnf.append([out] if node.value else [-out])
        elif isinstance(node, (And, Or)):
            kids = [visit(c) for c in node.children]
            out = pool.fresh()
            if isinstance(node, And):
                for k in kids:
                    cnf.append([-out, k])
                cnf.append([out] + [-k for k in kids])
            else:
                for k in kids:
                    cnf.append([out, -k])
                cnf.append([-out] + kids)
        else:
            raise TypeError(f"not a formula node: {node!r}")
        cache[node] = out
        return out

    out = visit(f)
    cnf.num_vars = max(cnf.num_vars, pool.top)
    return cnf, out


# --- cardinality -----------------------------------------------------------


def _gate_and(a, b, pool, cnf):
    if a is False or b is False:
        return False
    if a is True:
        return b
    if b is True:
        return a
    g = pool.fresh()
    cnf.append([-g, a])
    cnf.append([-g, b])
    cnf.append([g, -a, -b])
    return g


def _gate_or(a, b, pool, cnf):
    if a is True or b is True:
        return True
    if a is False:
        return b
    if b is False:
        return a
    g = pool.fresh()
    cnf.append([g, -a])
    cnf.append([g, -b])
    cnf.append([-g, a, b])
    return g


def encode_card_geq(lits: Sequence[int], t: int, out: int, pool: VarPool) -> Cnf:
    """Clauses for ``out <-> (sum(lits) >= t)``.

    Sequential counter: ``s[j]`` after reading literal ``i`` is equivalent
    to "at least j of the first i literals are true".  Every counter cell is
    defined by an equivalence, so ``out`` is a function of ``lits``.
    """
    m = len(lits)
    if not 1 <= t <= m:
        raise InvalidThreshold(f"threshold {t} outside 1..{m}")
    cnf = Cnf()
    # s[j] for j = 0..t; s[0] is constant true
    s: list = [True] + [False] * t
    for i, lit in enumerate(lits, start=1):
        nxt = [True]
        for j in range(1, t + 1):
            if j > i:
                nxt.append(False)
                continue
            nxt.append(_gate_or(s[j], _gate_and(s[j - 1], lit, pool, cnf), pool, cnf))
        s = nxt
    top = s[t]
    cnf.append([-out, top])
    cnf.append([out, -top])
    cnf.num_vars = max(cnf.num_vars, pool.top, abs(out))
    return cnf
