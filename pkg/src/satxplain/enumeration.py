"""MCS enumeration, MUS enumeration by hitting-set duality, and the
minimal hitting set routine they share.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import Timeout
from .formula import Cnf
from .solver import make_solver

DEFAULT_TIMEOUT = 600.0


@dataclass(frozen=True)
class EnumerationBudget:
    max_results: int | None = None
    timeout: float | None = DEFAULT_TIMEOUT

    def deadline(self) -> float | None:
        return None if self.timeout is None else time.monotonic() + self.timeout


UNBOUNDED = EnumerationBudget(None, None)


@dataclass
class EnumerationResult:
    sets: list[frozenset[int]] = field(default_factory=list)
    complete: bool = True
    reason: str | None = None  # why enumeration stopped early


def canonical(sets: Iterable[Iterable[int]]) -> list[frozenset[int]]:
    uniq = {frozenset(s) for s in sets}
    return sorted(uniq, key=lambda s: (len(s), sorted(s)))


def _check(deadline):
    if deadline is not None and time.monotonic() > deadline:
        raise Timeout("enumeration deadline exceeded")


class Engine:
    """One incremental solver over fixed hard clauses.

    Soft clauses are passed per call, so the same engine serves many
    instances that share the hard part (e.g. a whole neighborhood).  Unit
    soft clauses act as their own selector literal; longer ones get a fresh
    selector variable.
    """

    def __init__(self, hard: Cnf | Sequence[Sequence[int]], backend: str = "auto"):
        clauses = hard.clauses if isinstance(hard, Cnf) else hard
        self.solver = make_solver(clauses, backend)
        if isinstance(hard, Cnf):
            self.solver.ensure_var(hard.num_vars)
        self._selectors: dict[tuple[int, ...], int] = {}
        self._retired: list[int] = []

    def selectors(self, soft: Sequence[Sequence[int]]) -> list[int]:
        out = []
        for clause in soft:
            clause = tuple(clause)
            if len(clause) == 1:
                self.solver.ensure_var(abs(clause[0]))
                out.append(clause[0])
                continue
            if clause not in self._selectors:
                self.solver.ensure_var(max(abs(l) for l in clause))
                s = self.solver.new_var()
                self.solver.add_clause([-s, *clause])
                self._selectors[clause] = s
            out.append(self._selectors[clause])
        return out

    def sat(self, assumptions: Sequence[int], deadline=None) -> bool:
        return self.solver.solve(assumptions, deadline=deadline)

    # -- MSS growing -------------------------------------------------------

    def grow(self, sel: Sequence[int], seed: Iterable[int], extra: Sequence[int] = (), deadline=None) -> set[int]:
        """Extend soft indices ``seed`` to a maximal satisfiable subset.

        Each call asks for a model satisfying at least one still falsified
        soft clause, through a disjunction guarded by a throwaway activation
        literal, so the number of SAT calls follows the number of
        improvements rather than the number of soft clauses.
        """
        mss = set(seed)
        order = sorted(mss)  # assumption order; new indices go last so calls share a prefix
        base = list(extra)
        if not self.sat(base + [sel[i] for i in order], deadline):
            raise ValueError("grow seed is not satisfiable with the hard clauses")
        self._absorb(sel, mss, order)
        while len(mss) < len(sel):
            d = self.solver.new_var()
            self.solver.add_clause([-d] + [sel[i] for i in range(len(sel)) if i not in mss])
            try:
                ok = self.sat(base + [sel[i] for i in order] + [d], deadline)
            finally:
                self._retire(d)
            if not ok:
                break
            self._absorb(sel, mss, order)
        return mss

    def _absorb(self, sel, mss: set[int], order: list[int]) -> None:
        new = sorted(self._satisfied(sel, self.solver.model) - mss)
        mss.update(new)
        order.extend(new)

    def _retire(self, act: int) -> None:
        # retired activation literals are fixed false in batches, since every
        # unit clause costs a backtrack to level 0
        self._retired.append(act)
        if len(self._retired) >= 64:
            for a in self._retired:
                self.solver.add_clause([-a])
            self._retired.clear()

    @staticmethod
    def _satisfied(sel, model) -> set[int]:
        return {i for i, s in enumerate(sel) if model[abs(s)] == (1 if s > 0 else 0)}

    # -- enumeration -------------------------------------------------------

    def mcs(self, soft, budget: EnumerationBudget = EnumerationBudget(), verify: bool = True) -> EnumerationResult:
        sel = self.selectors(soft)
        # models that satisfy many soft clauses leave less for grow to do
        self.solver.prefer(sel)
        deadline = budget.deadline()
        act = self.solver.new_var()
        found: list[frozenset[int]] = []
        result = EnumerationResult()
        try:
            while True:
                if budget.max_results is not None and len(found) >= budget.max_results:
                    result.complete, result.reason = False, "max_results"
                    break
                _check(deadline)
                if not self.sat([act], deadline):
                    break
                seed = self._satisfied(sel, self.solver.model)
                mss = self.grow(sel, seed, extra=[act], deadline=deadline)
                mcs = frozenset(range(len(sel))) - mss
                if not mcs:
                    # hard + all soft is satisfiable: nothing to correct
                    break
                found.append(mcs)
                self.solver.add_clause([-act] + [sel[i] for i in sorted(mcs)])
        except Timeout:
            result.complete, result.reason = False, "timeout"
        finally:
            self._retire(act)
        if verify:
            for s in found:
                self.verify_mcs(sel, s)
        result.sets = canonical(found)
        return result

    def mus(self, soft, budget: EnumerationBudget = EnumerationBudget(), verify: bool = True,
            mcs_result: EnumerationResult | None = None) -> EnumerationResult:
        """All MUSes as minimal hitting sets of the complete MCS family.

        Refuses (returns an incomplete, empty result) when the MCS phase was
        cut short, since duality needs the whole family.
        """
        start = time.monotonic()
        if mcs_result is None:
            mcs_result = self.mcs(soft, budget, verify=verify)
        if not mcs_result.complete:
            return EnumerationResult([], False, "mcs-incomplete")
        if not mcs_result.sets:
            return EnumerationResult([], True)
        remaining = None if budget.timeout is None else budget.timeout - (time.monotonic() - start)
        deadline = None if remaining is None else time.monotonic() + max(0.0, remaining)
        try:
            hs = minimal_hitting_sets(mcs_result.sets, deadline=deadline, max_results=budget.max_results)
        except Timeout:
            return EnumerationResult([], False, "timeout")
        complete = budget.max_results is None or len(hs) < budget.max_results
        if verify:
            sel = self.selectors(soft)
            for s in hs:
                self.verify_mus(sel, s)
        return EnumerationResult(hs, complete, None if complete else "max_results")

    # -- self checks -------------------------------------------------------

    def verify_mcs(self, sel, mcs: frozenset[int]) -> None:
        keep = [sel[i] for i in range(len(sel)) if i not in mcs]
        if not self.sat(keep):
            raise AssertionError(f"complement of {sorted(mcs)} is not satisfiable")
        for i in mcs:
            if self.sat(keep + [sel[i]]):
                raise AssertionError(f"{sorted(mcs)} is not minimal: clause {i} can be kept")

    def verify_mus(self, sel, mus: frozenset[int]) -> None:
        lits = [sel[i] for i in sorted(mus)]
        if self.sat(lits):
            raise AssertionError(f"{sorted(mus)} is satisfiable")
        for i in mus:
            if not self.sat([sel[j] for j in sorted(mus) if j != i]):
                raise AssertionError(f"{sorted(mus)} is not minimal: drop {i}")


def enumerate_mcs(p, budget: EnumerationBudget = EnumerationBudget(), verify: bool = True,
                  backend: str = "auto") -> EnumerationResult:
    return Engine(p.hard, backend).mcs(p.soft, budget, verify)


def enumerate_mus(p, budget: EnumerationBudget = EnumerationBudget(), verify: bool = True,
                  backend: str = "auto") -> EnumerationResult:
    return Engine(p.hard, backend).mus(p.soft, budget, verify)


def grow_mss(p, seed: Iterable[int], backend: str = "auto") -> frozenset[int]:
    engine = Engine(p.hard, backend)
    return frozenset(engine.grow(engine.selectors(p.soft), seed))


def minimal_hitting_sets(family: Iterable[Iterable[int]], deadline: float | None = None,
                         max_results: int | None = None) -> list[frozenset[int]]:
    """All inclusion-minimal transversals of ``family``.

    Depth-first search in the style of MMCS (Murakami and Uno): branch on
    the elements of the uncovered set with fewest candidates, and prune any
    partial set containing an element with no critical (privately hit) set.
    """
    sets = [frozenset(s) for s in family]
    if any(not s for s in sets):
        raise ValueError("cannot hit an empty set")
    if not sets:
        return [frozenset()]
    occ: dict[int, set[int]] = {}
    for j, s in enumerate(sets):
        for e in s:
            occ.setdefault(e, set()).add(j)
    out: list[frozenset[int]] = []
    chosen: list[int] = []
    crit: dict[int, set[int]] = {}
    uncov = set(range(len(sets)))
    cand = set(occ)
    ticks = [0]

    class _Done(Exception):
        pass

    def rec():
        ticks[0] += 1
        if deadline is not None and ticks[0] % 512 == 0 and time.monotonic() > deadline:
            raise Timeout("hitting-set enumeration deadline exceeded")
        if not uncov:
            out.append(frozenset(chosen))
            if max_results is not None and len(out) >= max_results:
                raise _Done
            return
        pick = min(uncov, key=lambda j: (len(sets[j] & cand), j))
        branch = sorted(sets[pick] & cand)
        cand.difference_update(branch)
        for e in branch:
            hit = occ[e]
            newly = uncov & hit
            lost = {}
            ok = True
            for f in chosen:
                drop = crit[f] & hit
                if drop:
                    lost[f] = drop
                    crit[f] -= drop
                    if not crit[f]:
                        ok = False
            uncov.difference_update(newly)
            if ok:
                chosen.append(e)
                crit[e] = set(newly)
                rec()
                chosen.pop()
                del crit[e]
            uncov.update(newly)
            for f, drop in lost.items():
                crit[f] |= drop
            cand.add(e)

    try:
        rec()
    except _Done:
        pass
    return canonical(out)
