"""A small incremental CDCL SAT solver.

Two-watched-literal propagation, first-UIP learning with local clause
minimization, VSIDS branching with phase saving, Luby restarts and
assumption literals with final-conflict core extraction.

Literals at the API are DIMACS-style signed ints.  Internally a literal
``l`` is coded as ``2*abs(l) + (l < 0)`` so that negation is ``x ^ 1``.
"""

from __future__ import annotations

import heapq
import random
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import Timeout

SAT = "SAT"
UNSAT = "UNSAT"


def _enc(lit: int) -> int:
    return (lit << 1) if lit > 0 else ((-lit) << 1) | 1


def _dec(code: int) -> int:
    v = code >> 1
    return -v if code & 1 else v


def _luby(i: int) -> int:
    # i >= 1
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    while True:
        if i == (1 << k) - 1:
            return 1 << (k - 1)
        i -= (1 << (k - 1)) - 1
        k = 1
        while (1 << k) - 1 < i:
            k += 1


@dataclass
class SatResult:
    status: str
    model: dict[int, int] | None = None
    core: list[int] = field(default_factory=list)

    @property
    def sat(self) -> bool:
        return self.status == SAT


class Solver:
    restart_unit = 100
    var_decay = 0.95

    def __init__(self, clauses: Iterable[Iterable[int]] = (), seed: int | None = None):
        self.nvars = 0
        self.ok = True
        self.val: list[int] = [0, 0]  # per coded literal: 1 true, -1 false, 0 unassigned
        self.level: list[int] = [0]
        self.reason: list = [None]
        self.activity: list[float] = [0.0]
        self.phase: list[int] = [1]  # coded-literal bit: 1 -> negative polarity first
        self.watches: list[list] = [[], []]
        self.seen: list[int] = [0]
        self.inheap: list[bool] = [False]
        self.forced_phase: dict[int, int] = {}
        self.assumed: list[int] = []  # coded assumption decided at each retained level
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.clauses: list[list[int]] = []
        self.learnts: list[list[int]] = []
        self.var_inc = 1.0
        self.heap: list = []
        self.rng = random.Random(seed) if seed is not None else None
        self.core: list[int] = []
        self.model: dict[int, int] | None = None
        self.conflicts = 0
        self.max_learnts = 2000
        self._fixed_since_simplify = 0
        for c in clauses:
            self.add_clause(c)

    # -- variables ---------------------------------------------------------

    def ensure_var(self, v: int) -> None:
        while self.nvars < v:
            self.nvars += 1
            self.val.extend((0, 0))
            self.level.append(0)
            self.reason.append(None)
            act = self.rng.random() * 1e-5 if self.rng else 0.0
            self.activity.append(act)
            self.phase.append(1)
            self.watches.extend(([], []))
            self.seen.append(0)
            self.inheap.append(True)
            heapq.heappush(self.heap, (-act, self.nvars))

    def prefer(self, lits: Iterable[int]) -> None:
        """Branch on these literals' polarity first; overrides phase saving."""
        for lit in lits:
            self.ensure_var(abs(lit))
            self.forced_phase[abs(lit)] = 0 if lit > 0 else 1

    def new_var(self) -> int:
        self.ensure_var(self.nvars + 1)
        return self.nvars

    # -- clauses -----------------------------------------------------------

    def add_clause(self, lits: Iterable[int]) -> bool:
        """Add a permanent clause; returns False once the solver is UNSAT.

        The current trail is kept when two literals of the new clause are
        still unassigned or true, so assumption prefixes survive between
        incremental calls.
        """
        if not self.ok:
            return False
        coded = set()
        for lit in lits:
            self.ensure_var(abs(lit))
            coded.add(_enc(lit))
        val, level = self.val, self.level
        out = []
        for c in coded:
            if c ^ 1 in coded:
                return True
            if val[c] == 1 and level[c >> 1] == 0:
                return True
            if val[c] != -1 or level[c >> 1] > 0:
                out.append(c)
        if self.trail_lim:
            live = [c for c in out if val[c] != -1]
            if len(live) >= 2:
                rest = [c for c in out if val[c] == -1]
                rest.sort(key=lambda c: -level[c >> 1])
                cl = live + rest
                self.clauses.append(cl)
                self._watch(cl)
                return True
            self._cancel_until(0)
        if not out:
            self.ok = False
            return False
        if len(out) == 1:
            self._enqueue(out[0], None)
            self._fixed_since_simplify += 1
            if self._propagate() is not None:
                self.ok = False
            return self.ok
        out.sort()
        self.clauses.append(out)
        self._watch(out)
        return True

    def _watch(self, c: list[int]) -> None:
        self.watches[c[0]].append(c)
        self.watches[c[1]].append(c)

    # -- trail -------------------------------------------------------------

    def _enqueue(self, code: int, reason) -> None:
        v = code >> 1
        self.val[code] = 1
        self.val[code ^ 1] = -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(code)

    def _cancel_until(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        val, phase, reason, heap, act, inheap = self.val, self.phase, self.reason, self.heap, self.activity, self.inheap
        stop = self.trail_lim[lvl]
        for code in reversed(self.trail[stop:]):
            v = code >> 1
            val[code] = 0
            val[code ^ 1] = 0
            reason[v] = None
            phase[v] = code & 1
            if not inheap[v]:
                inheap[v] = True
                heapq.heappush(heap, (-act[v], v))
        del self.trail[stop:]
        del self.trail_lim[lvl:]
        del self.assumed[lvl:]
        self.qhead = len(self.trail)
        if len(heap) > 4 * self.nvars + 1024:
            self._rebuild_heap()

    def _rebuild_heap(self) -> None:
        act, val = self.activity, self.val
        self.heap = [(-act[v], v) for v in range(1, self.nvars + 1) if val[v << 1] == 0]
        heapq.heapify(self.heap)
        self.inheap = [False] * (self.nvars + 1)
        for _, v in self.heap:
            self.inheap[v] = True

    def _propagate(self):
        val = self.val
        watches = self.watches
        trail = self.trail
        level = self.level
        reason = self.reason
        dl = len(self.trail_lim)
        while self.qhead < len(trail):
            p = trail[self.qhead]
            self.qhead += 1
            false_lit = p ^ 1
            ws = watches[false_lit]
            keep = []
            n = len(ws)
            i = 0
            while i < n:
                c = ws[i]
                i += 1
                if c[0] == false_lit:
                    c[0], c[1] = c[1], false_lit
                first = c[0]
                if val[first] == 1:
                    keep.append(c)
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    if val[lk] != -1:
                        c[1], c[k] = lk, false_lit
                        watches[lk].append(c)
                        break
                else:
                    keep.append(c)
                    if val[first] == -1:
                        keep.extend(ws[i:])
                        watches[false_lit] = keep
                        self.qhead = len(trail)
                        return c
                    v = first >> 1
                    val[first] = 1
                    val[first ^ 1] = -1
                    level[v] = dl
                    reason[v] = c
                    trail.append(first)
            watches[false_lit] = keep
        return None

    # -- conflict analysis -------------------------------------------------

    def _bump(self, v: int) -> None:
        act = self.activity
        act[v] += self.var_inc
        if act[v] > 1e100:
            for i in range(1, self.nvars + 1):
                act[i] *= 1e-100
            self.var_inc *= 1e-100
            self._rebuild_heap()
        elif self.val[v << 1] == 0:
            self.inheap[v] = True
            heapq.heappush(self.heap, (-act[v], v))
        else:
            self.inheap[v] = False  # its entry is stale; re-pushed when unassigned

    def _analyze(self, confl):
        seen = self.seen
        level = self.level
        reason = self.reason
        trail = self.trail
        dl = len(self.trail_lim)
        learnt = [0]
        counter = 0
        p = None
        idx = len(trail) - 1
        touched = []
        c = confl
        while True:
            for q in c:
                if p is not None and q == p:
                    continue
                v = q >> 1
                if not seen[v] and level[v] > 0:
                    seen[v] = 1
                    touched.append(v)
                    self._bump(v)
                    if level[v] >= dl:
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[trail[idx] >> 1]:
                idx -= 1
            p = trail[idx]
            idx -= 1
            c = reason[p >> 1]
            counter -= 1
            if counter <= 0:
                break
        learnt[0] = p ^ 1
        # local minimization: drop literals implied by other learnt literals
        out = [learnt[0]]
        for q in learnt[1:]:
            r = reason[q >> 1]
            if r is None:
                out.append(q)
                continue
            for x in r:
                xv = x >> 1
                if xv != q >> 1 and not seen[xv] and level[xv] > 0:
                    out.append(q)
                    break
        for v in touched:
            seen[v] = 0
        if len(out) == 1:
            bt = 0
        else:
            best = 1
            for i in range(2, len(out)):
                if level[out[i] >> 1] > level[out[best] >> 1]:
                    best = i
            out[1], out[best] = out[best], out[1]
            bt = level[out[1] >> 1]
        self.var_inc /= self.var_decay
        return out, bt

    def _analyze_final(self, p: int) -> list[int]:
        """Assumptions responsible for ``p`` being false (p is coded)."""
        core = [p]
        if not self.trail_lim:
            return core
        seen = self.seen
        seen[p >> 1] = 1
        touched = [p >> 1]
        for code in reversed(self.trail[self.trail_lim[0]:]):
            v = code >> 1
            if not seen[v]:
                continue
            r = self.reason[v]
            if r is None:
                if self.level[v] > 0:
                    core.append(code)
            else:
                for q in r:
                    qv = q >> 1
                    if self.level[qv] > 0 and not seen[qv]:
                        seen[qv] = 1
                        touched.append(qv)
        for v in touched:
            seen[v] = 0
        return core

    def _simplify(self) -> None:
        """Drop clauses satisfied at level 0 (e.g. retired activation clauses)."""
        val = self.val
        locked = {id(self.reason[c >> 1]) for c in self.trail if self.reason[c >> 1] is not None}
        dead = set()
        for db in (self.clauses, self.learnts):
            for c in db:
                if id(c) not in locked and any(val[q] == 1 for q in c):
                    dead.add(id(c))
        if dead:
            self.clauses = [c for c in self.clauses if id(c) not in dead]
            self.learnts = [c for c in self.learnts if id(c) not in dead]
            self.watches = [[c for c in ws if id(c) not in dead] for ws in self.watches]
        self._fixed_since_simplify = 0

    # -- learnt clause database ---------------------------------------------

    def _reduce_db(self) -> None:
        locked = set()
        for code in self.trail:
            r = self.reason[code >> 1]
            if r is not None:
                locked.add(id(r))
        self.learnts.sort(key=len)
        half = len(self.learnts) // 2
        keep, drop = self.learnts[:half], self.learnts[half:]
        dropped = set()
        for c in drop:
            if len(c) <= 2 or id(c) in locked:
                keep.append(c)
            else:
                dropped.add(id(c))
        self.learnts = keep
        if dropped:
            self.watches = [[c for c in ws if id(c) not in dropped] for ws in self.watches]
        self.max_learnts = int(self.max_learnts * 1.1)

    # -- search ------------------------------------------------------------

    def _pick_branch(self) -> int:
        heap, val, act, inheap = self.heap, self.val, self.activity, self.inheap
        while heap:
            a, v = heapq.heappop(heap)
            if -a != act[v] or not inheap[v]:
                continue  # stale entry
            inheap[v] = False
            if val[v << 1] == 0:
                return (v << 1) | self.forced_phase.get(v, self.phase[v])
        for v in range(1, self.nvars + 1):
            if val[v << 1] == 0:
                return (v << 1) | self.forced_phase.get(v, self.phase[v])
        return -1

    def solve(self, assumptions: Sequence[int] = (), deadline: float | None = None) -> bool:
        """Decide satisfiability under ``assumptions``.

        On SAT ``self.model`` maps every variable to 0/1.  On UNSAT
        ``self.core`` holds a subset of the assumptions whose conjunction is
        already inconsistent with the clauses (empty if the clauses alone
        are UNSAT).
        """
        self.model = None
        self.core = []
        if not self.ok:
            return False
        for a in assumptions:
            self.ensure_var(abs(a))
        assumps = [_enc(a) for a in assumptions]
        keep = 0
        limit = min(len(self.assumed), len(assumps))
        while keep < limit and self.assumed[keep] == assumps[keep]:
            keep += 1
        self._cancel_until(keep)
        if self._fixed_since_simplify >= 64:
            self._cancel_until(0)
            self._simplify()
        if self._propagate() is not None:
            if not self.trail_lim:
                self.ok = False
                return False
            self._cancel_until(0)
            if self._propagate() is not None:
                self.ok = False
                return False
        restarts = 0
        budget = self.restart_unit * _luby(1)
        local_conflicts = 0
        checks = 0
        try:
            while True:
                confl = self._propagate()
                if confl is not None:
                    self.conflicts += 1
                    local_conflicts += 1
                    if not self.trail_lim:
                        self.ok = False
                        return False
                    learnt, bt = self._analyze(confl)
                    self._cancel_until(bt)
                    if len(learnt) == 1:
                        self._enqueue(learnt[0], None)
                    else:
                        self.learnts.append(learnt)
                        self._watch(learnt)
                        self._enqueue(learnt[0], learnt)
                    if deadline is not None and self.conflicts % 64 == 0 and time.monotonic() > deadline:
                        raise Timeout("SAT call exceeded its deadline")
                    continue
                if local_conflicts >= budget:
                    restarts += 1
                    budget = self.restart_unit * _luby(restarts + 1)
                    local_conflicts = 0
                    self._cancel_until(0)
                    continue
                if len(self.learnts) - len(self.trail) >= self.max_learnts:
                    self._reduce_db()
                dl = len(self.trail_lim)
                if dl < len(assumps):
                    p = assumps[dl]
                    if self.val[p] == 1:
                        self.trail_lim.append(len(self.trail))
                        self.assumed.append(p)
                        continue
                    if self.val[p] == -1:
                        self.core = sorted({_dec(c) for c in self._analyze_final(p)}, key=abs)
                        return False
                    nxt = p
                    self.assumed.append(p)
                else:
                    checks += 1
                    if deadline is not None and checks % 256 == 0 and time.monotonic() > deadline:
                        raise Timeout("SAT call exceeded its deadline")
                    nxt = self._pick_branch()
                    if nxt < 0:
                        self.model = {v: 1 if self.val[v << 1] == 1 else 0 for v in range(1, self.nvars + 1)}
                        return True
                self.trail_lim.append(len(self.trail))
                self._enqueue(nxt, None)
        finally:
            # keep the assumption levels for the next call, drop search decisions
            self._cancel_until(min(len(self.assumed), len(self.trail_lim)))


def solve(hard: Iterable[Iterable[int]], assumptions: Sequence[int] = (), deadline: float | None = None,
          num_vars: int = 0) -> SatResult:
    """One-shot SAT call over ``hard`` under ``assumptions``."""
    s = Solver(hard)
    s.ensure_var(num_vars)
    if s.solve(assumptions, deadline=deadline):
        return SatResult(SAT, s.model)
    return SatResult(UNSAT, None, s.core)


class _ModelView:
    """Read-only var -> 0/1 view over a backend model (variables it never saw are 0)."""

    __slots__ = ("_raw", "_n")

    def __init__(self, raw: list[int], n: int):
        self._raw = raw
        self._n = n

    def __getitem__(self, v: int) -> int:
        if not 1 <= v <= self._n:
            raise KeyError(v)
        return 1 if v <= len(self._raw) and self._raw[v - 1] > 0 else 0

    def get(self, v: int, default=None):
        return self[v] if 1 <= v <= self._n else default

    def __len__(self) -> int:
        return self._n

    def __iter__(self):
        return iter(range(1, self._n + 1))

    def keys(self):
        return range(1, self._n + 1)

    def items(self):
        return ((v, self[v]) for v in range(1, self._n + 1))

    def __eq__(self, other) -> bool:
        return dict(self.items()) == dict(other.items())


class PysatSolver:
    """The :class:`Solver` interface over a compiled solver from python-sat.

    Same semantics (assumptions, cores, deadlines, preferred phases); only
    speed differs.  Deadlines are checked between conflict-budgeted slices.
    """

    slice_conflicts = 20000

    def __init__(self, clauses: Iterable[Iterable[int]] = (), seed: int | None = None, name: str = "minisat22"):
        from pysat.solvers import Solver as _Backend

        self._s = _Backend(name=name)
        self.nvars = 0
        self.ok = True
        self.model: dict[int, int] | None = None
        self.core: list[int] = []
        self._phases: dict[int, int] = {}
        for c in clauses:
            self.add_clause(c)

    def ensure_var(self, v: int) -> None:
        self.nvars = max(self.nvars, v)

    def new_var(self) -> int:
        self.nvars += 1
        return self.nvars

    def prefer(self, lits: Iterable[int]) -> None:
        for lit in lits:
            self.ensure_var(abs(lit))
            self._phases[abs(lit)] = lit
        self._s.set_phases(list(self._phases.values()))

    def add_clause(self, lits: Iterable[int]) -> bool:
        lits = [int(l) for l in lits]
        for l in lits:
            self.ensure_var(abs(l))
        if not self.ok:
            return False
        if not lits:
            self.ok = False
            return False
        self._s.add_clause(lits)
        return True

    def solve(self, assumptions: Sequence[int] = (), deadline: float | None = None) -> bool:
        self.model = None
        self.core = []
        if not self.ok:
            return False
        assumptions = [int(a) for a in assumptions]
        for a in assumptions:
            self.ensure_var(abs(a))
        if deadline is None:
            res = self._s.solve(assumptions=assumptions)
        else:
            while True:
                if time.monotonic() > deadline:
                    raise Timeout("SAT call exceeded its deadline")
                self._s.conf_budget(self.slice_conflicts)
                res = self._s.solve_limited(assumptions=assumptions)
                if res is not None:
                    break
        if res:
            self.model = _ModelView(self._s.get_model() or [], self.nvars)
            return True
        self.core = sorted(set(self._s.get_core() or []), key=abs)
        if not self.core:
            self.ok = False  # UNSAT without help from any assumption
        return False

    def __del__(self):
        try:
            self._s.delete()
        except Exception:
            pass


def have_pysat() -> bool:
    try:
        import pysat.solvers  # noqa: F401
    except ImportError:
        return False
    return True


BACKENDS = ("auto", "python", "pysat")


def make_solver(clauses: Iterable[Iterable[int]] = (), backend: str = "auto"):
    """A fresh incremental solver: the built-in CDCL or the python-sat one."""
    if backend not in BACKENDS:
        raise ValueError(f"unknown solver backend {backend!r}")
    if backend == "pysat" or (backend == "auto" and have_pysat()):
        return PysatSolver(clauses)
    return Solver(clauses)
