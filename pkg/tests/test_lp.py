import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eivsm import lp
from eivsm.lp import EQ, GE, LE, LinearProgram, LpStatus, Tolerances
from oracles import random_lp, vertex_enumeration


def test_box_only():
    sol = lp.solve(LinearProgram([1.0], np.zeros((0, 1)), [], [], [-1.0], [1.0]))
    assert sol.optimal
    assert sol.point[0] == -1.0 and sol.objective_value == -1.0


def test_single_active_constraint():
    sol = lp.solve(LinearProgram([1.0, 1.0], [[1.0, 1.0]], [GE], [2.0], [0.0, 0.0], [3.0, 3.0]))
    assert sol.optimal
    assert sol.objective_value == pytest.approx(2.0, abs=1e-12)


def test_infeasible():
    prog = LinearProgram([1.0, 0.0], [[1.0, 1.0]], [GE], [10.0], [0.0, 0.0], [1.0, 1.0])
    assert lp.solve(prog).status is LpStatus.INFEASIBLE


def test_unbounded():
    prog = LinearProgram([-1.0, 0.0], [[1.0, -1.0]], [LE], [1.0], [0.0, 0.0], [math.inf, math.inf])
    assert lp.solve(prog).status is LpStatus.UNBOUNDED


def test_free_variables_and_equalities():
    # min x + 2y  s.t.  x - y = 1, x + y >= 3, x, y free -> x = 2, y = 1
    prog = LinearProgram.from_rows([1.0, 2.0], [([1, -1], EQ, 1.0), ([1, 1], GE, 3.0)], [(None, None)] * 2)
    sol = lp.solve(prog)
    assert sol.optimal
    np.testing.assert_allclose(sol.point, [2.0, 1.0], atol=1e-12)


def test_bound_validation():
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[1.0]], [LE], [1.0], [1.0], [0.0])
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[1.0]], ["<"], [1.0], [0.0], [1.0])
    with pytest.raises(ValueError):
        LinearProgram([1.0, 2.0], [[1.0, 1.0]], [LE, GE], [1.0], [0.0, 0.0], [1.0, 1.0])


def test_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        prog = random_lp(rng)
        expected = vertex_enumeration(prog)
        sol = lp.solve(prog)
        if expected is None:
            assert sol.status is LpStatus.INFEASIBLE
        else:
            assert sol.optimal
            assert abs(sol.objective_value - expected) <= 1e-8
            assert prog.max_violation(sol.point) <= 1e-7


# Classical cycling examples: the textbook Dantzig rule cycles on both.
BEALE = ([-0.75, 20.0, -0.5, 6.0], [[0.25, -8, -1, 9], [0.5, -12, -0.5, 3], [0, 0, 1, 0]], [0.0, 0.0, 1.0], -1.25)
KUHN = ([-2.0, -3.0, 1.0, 12.0], [[-2, -9, 1, 9], [1 / 3, 1, -1 / 3, -2], [2, 3, -1, -12]], [0.0, 0.0, 2.0], -2.0)


@pytest.mark.parametrize("c, A, b, expected", [BEALE, KUHN], ids=["beale", "kuhn"])
def test_cycling_instances_terminate(c, A, b, expected):
    prog = LinearProgram(c, A, [LE] * 3, b, 0.0, math.inf)
    sol = lp.solve(prog)
    assert sol.optimal
    assert sol.objective_value == pytest.approx(expected, abs=1e-9)
    assert sol.iterations < 1000


def test_highly_degenerate_vertex():
    # many constraints through the origin, optimum at a degenerate vertex
    rng = np.random.default_rng(3)
    A = rng.normal(size=(12, 3))
    A[:, 0] = np.abs(A[:, 0]) + 0.1
    prog = LinearProgram([1.0, 0.0, 0.0], A, [GE] * 12, np.zeros(12), -5.0, 5.0)
    sol = lp.solve(prog)
    assert sol.optimal
    assert prog.max_violation(sol.point) <= 1e-9
    assert sol.objective_value == pytest.approx(vertex_enumeration(prog), abs=1e-9)


def test_determinism():
    rng = np.random.default_rng(11)
    for _ in range(20):
        prog = random_lp(rng)
        a, b = lp.solve(prog), lp.solve(prog)
        assert a.status is b.status
        if a.optimal:
            assert a.objective_value == b.objective_value


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), factor=st.floats(0.01, 100.0))
def test_objective_scaling(seed, factor):
    prog = random_lp(np.random.default_rng(seed))
    base = lp.solve(prog)
    scaled = lp.solve(prog.with_objective(factor * prog.c))
    assert scaled.status is base.status
    if base.optimal:
        assert scaled.objective_value == pytest.approx(factor * base.objective_value, rel=1e-9, abs=1e-9)
        assert prog.max_violation(scaled.point) <= 1e-7


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_optimal_points_are_feasible(seed):
    prog = random_lp(np.random.default_rng(seed))
    sol = lp.solve(prog)
    if sol.optimal:
        assert prog.max_violation(sol.point) <= 1e-7


def test_agrees_with_highs():
    scipy_optimize = pytest.importorskip("scipy.optimize")
    rng = np.random.default_rng(99)
    for _ in range(100):
        prog = random_lp(rng)
        s = np.array(prog.senses)
        A_ub = np.vstack([prog.A[s == LE], -prog.A[s == GE]])
        b_ub = np.concatenate([prog.b[s == LE], -prog.b[s == GE]])
        eq = s == EQ
        ref = scipy_optimize.linprog(
            prog.c,
            A_ub=A_ub if len(b_ub) else None,
            b_ub=b_ub if len(b_ub) else None,
            A_eq=prog.A[eq] if eq.any() else None,
            b_eq=prog.b[eq] if eq.any() else None,
            bounds=list(zip(prog.lo, prog.hi)),
            method="highs",
        )
        sol = lp.solve(prog)
        if ref.status == 2:
            assert sol.status is LpStatus.INFEASIBLE
        else:
            assert sol.objective_value == pytest.approx(ref.fun, abs=1e-8)


def test_dump_round_trip():
    prog = LinearProgram.from_rows(
        [1.0, -0.1], [([1.0, 1.0 / 3.0], LE, 2.5), ([0.0, 1.0], EQ, -1.0)], [(None, 4.0), (-2.0, None)]
    )
    text = lp.dumps(prog)
    assert text.splitlines()[3] == "1 0.33333333333333331 | <= | 2.5"
    back = lp.loads(text)
    for name in ("c", "A", "b", "lo", "hi"):
        np.testing.assert_array_equal(getattr(back, name), getattr(prog, name))
    assert back.senses == prog.senses


def test_custom_tolerances_accepted():
    prog = LinearProgram([1.0, 1.0], [[1.0, 1.0]], [GE], [2.0], [0.0, 0.0], [3.0, 3.0])
    sol = lp.solve(prog, Tolerances(feasibility=1e-7, pivot=1e-9, optimality=1e-7))
    assert sol.objective_value == pytest.approx(2.0)
