import random

import pytest

from oracles import truth_table_sat
from satxplain.errors import Timeout
from satxplain.solver import SAT, UNSAT, PysatSolver, Solver, make_solver, solve


def test_contradiction():
    assert solve([[1], [-1]]).status == UNSAT


def test_assumption_forces_other_literal():
    res = solve([[1, 2]], [-1])
    assert res.status == SAT
    assert res.model[2] == 1


def test_empty_clause_set_is_sat():
    assert solve([], num_vars=3).sat


def test_agreement_with_truth_tables():
    rng = random.Random(11)
    for _ in range(500):
        n = rng.randint(1, 12)
        m = rng.randint(1, 6 * n)
        clauses = [[rng.choice((-1, 1)) * rng.randint(1, n) for _ in range(3)] for _ in range(m)]
        assume = [rng.choice((-1, 1)) * v for v in rng.sample(range(1, n + 1), rng.randint(0, min(3, n)))]
        res = solve(clauses, assume, num_vars=n)
        fixed = {abs(a): int(a > 0) for a in assume}
        consistent = len(fixed) == len(assume)
        assert res.sat == (consistent and truth_table_sat(clauses, n, fixed))
        if res.sat:
            assert all(any(res.model[abs(l)] == (l > 0) for l in c) for c in clauses)
            assert all(res.model[abs(a)] == (a > 0) for a in assume)
        else:
            # the core is a subset of the assumptions and is itself inconsistent
            assert set(res.core) <= set(assume)
            core_fixed = {abs(a): int(a > 0) for a in res.core}
            assert not truth_table_sat(clauses, n, core_fixed)


def test_incremental_reuse():
    s = Solver([[1, 2], [-1, 3]])
    assert s.solve([-3])
    assert s.model[2] == 1
    s.add_clause([-2])
    assert not s.solve([-3])
    assert s.core == [-3]
    assert s.solve()


def test_pigeonhole_unsat():
    # 6 pigeons, 5 holes
    p, h = 6, 5
    var = lambda i, j: i * h + j + 1  # noqa: E731
    clauses = [[var(i, j) for j in range(h)] for i in range(p)]
    for j in range(h):
        for a in range(p):
            for b in range(a + 1, p):
                clauses.append([-var(a, j), -var(b, j)])
    assert not solve(clauses).sat


def test_deterministic():
    rng = random.Random(5)
    n = 60
    clauses = [[rng.choice((-1, 1)) * v for v in rng.sample(range(1, n + 1), 3)] for _ in range(240)]
    a = Solver(clauses, seed=3)
    b = Solver(clauses, seed=3)
    assert a.solve() == b.solve()
    assert a.model == b.model


def test_timeout():
    rng = random.Random(0)
    n = 250
    clauses = [[rng.choice((-1, 1)) * v for v in rng.sample(range(1, n + 1), 3)] for _ in range(int(4.26 * n))]
    with pytest.raises(Timeout):
        Solver(clauses).solve(deadline=0.0)


def test_backends_agree_on_random_cnfs():
    rng = random.Random(29)
    for _ in range(200):
        n = rng.randint(1, 12)
        clauses = [[rng.choice((-1, 1)) * rng.randint(1, n) for _ in range(3)] for _ in range(rng.randint(1, 6 * n))]
        assume = [rng.choice((-1, 1)) * v for v in rng.sample(range(1, n + 1), rng.randint(0, min(3, n)))]
        fast = PysatSolver(clauses)
        fast.ensure_var(n)
        ref = truth_table_sat(clauses, n, {abs(a): int(a > 0) for a in assume}) and \
            len({abs(a) for a in assume}) == len(assume)
        assert fast.solve(assume) == ref
        if ref:
            assert all(any(fast.model[abs(l)] == (l > 0) for l in c) for c in clauses)
        else:
            assert set(fast.core) <= set(assume)
            assert not truth_table_sat(clauses, n, {abs(a): int(a > 0) for a in fast.core})


def test_pysat_incremental_and_timeout():
    s = PysatSolver([[1, 2], [-1, 3]])
    assert s.solve([-3]) and s.model[2] == 1
    s.add_clause([-2])
    assert not s.solve([-3]) and s.core == [-3]
    assert s.solve()
    rng = random.Random(0)
    n = 250
    clauses = [[rng.choice((-1, 1)) * v for v in rng.sample(range(1, n + 1), 3)] for _ in range(int(4.26 * n))]
    with pytest.raises(Timeout):
        PysatSolver(clauses).solve(deadline=0.0)


def test_make_solver():
    assert isinstance(make_solver([[1]], "python"), Solver)
    assert isinstance(make_solver([[1]], "pysat"), PysatSolver)
    with pytest.raises(ValueError):
        make_solver([], "glpk")


def test_preferred_phase_leads_the_first_model():
    for s in (Solver([[1, 2, 3]]), PysatSolver([[1, 2, 3]])):
        s.prefer([-1, -2, 3])
        assert s.solve()
        assert (s.model[1], s.model[2], s.model[3]) == (0, 0, 1)
