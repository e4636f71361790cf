import numpy as np
import pytest

from sfpump import oracles
from sfpump.lp import core
from sfpump.lp import DenseLp, LpStatus, MaxPivotsExceeded, project_l1, solve_lp
from sfpump.lp import _kernel_py


def random_lp(rng, n=None, m=None):
    n = n or int(rng.integers(1, 6))
    m = m or int(rng.integers(1, 9))
    A = rng.integers(-10, 11, (m, n))
    b = rng.integers(-10, 11, m)
    c = rng.integers(-10, 11, n)
    return DenseLp(c, A, b, np.full(n, -20.0), np.full(n, 20.0))


def test_box_only_lp_hits_the_bound():
    lp = DenseLp([1.0, -2.0], np.zeros((0, 2)), np.zeros(0), [-3, -3], [4, 5])
    out = solve_lp(lp)
    assert out.status is LpStatus.OPTIMAL
    np.testing.assert_allclose(out.point, [-3, 5])
    assert out.objective_value == pytest.approx(-13)


def test_small_textbook_lp():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6  ->  (1.6, 1.2)
    lp = DenseLp([-1, -1], [[1, 2], [3, 1]], [4, 6], [0, 0], [10, 10])
    out = solve_lp(lp)
    np.testing.assert_allclose(out.point, [1.6, 1.2], atol=1e-12)


def test_negative_rhs_needs_phase_one():
    lp = DenseLp([1, 1], [[-1, -1]], [-3], [0, 0], [5, 5])
    out = solve_lp(lp)
    assert out.status is LpStatus.OPTIMAL
    assert out.objective_value == pytest.approx(3)


def test_infeasible_is_reported():
    lp = DenseLp([0, 0], [[1, 1], [-1, -1]], [1, -3], [-5, -5], [5, 5])
    assert solve_lp(lp).status is LpStatus.INFEASIBLE


def test_matches_vertex_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(60):
        lp = random_lp(rng)
        want, _ = oracles.vertex_enumeration(lp.objective, lp.row_matrix, lp.rhs,
                                             lp.lower_bounds, lp.upper_bounds)
        got = solve_lp(lp)
        if want is None:
            assert got.status is LpStatus.INFEASIBLE
        else:
            assert got.status is LpStatus.OPTIMAL
            assert abs(got.objective_value - want) <= 1e-6
            assert lp.violation(got.point) <= 1e-7


def test_degenerate_lp_terminates():
    # many redundant constraints through the same vertex
    A = np.array([[1, 1], [1, 1], [2, 2], [1, 0], [0, 1], [1, 2]], float)
    b = np.array([2, 2, 4, 1, 1, 3], float)
    out = solve_lp(DenseLp([-1, -1], A, b, [0, 0], [5, 5]))
    assert out.objective_value == pytest.approx(-2)


def test_same_input_same_answer():
    lp = random_lp(np.random.default_rng(3), 5, 8)
    a, b = solve_lp(lp), solve_lp(lp)
    assert a.status == b.status and a.pivots == b.pivots
    if a.point is not None:
        assert np.array_equal(a.point, b.point)


def test_pivot_budget_raises():
    lp = DenseLp([-1, -1], [[1, 2], [3, 1]], [4, 6], [0, 0], [10, 10])
    with pytest.raises(MaxPivotsExceeded):
        solve_lp(lp, max_pivots=1)


def test_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        DenseLp([1], [[1]], [1], [2], [1])


@pytest.mark.skipif(core.BACKEND != "cython", reason="compiled kernel not built")
def test_backends_agree(monkeypatch):
    rng = np.random.default_rng(5)
    lps = [random_lp(rng) for _ in range(40)]
    fast = [solve_lp(lp) for lp in lps]
    monkeypatch.setattr(core, "_kernel", _kernel_py)
    slow = [solve_lp(lp) for lp in lps]
    for a, b in zip(fast, slow):
        assert a.status == b.status and a.pivots == b.pivots
        if a.point is not None:
            np.testing.assert_allclose(a.point, b.point, atol=1e-12)


def test_projection_of_feasible_anchor_is_itself():
    A = np.array([[1, 1]])
    x = project_l1(A, np.array([4]), np.array([-20, -20]), np.array([20, 20]), np.array([1.0, 2.0]))
    assert np.array_equal(x, [1.0, 2.0])


def test_projection_is_minimal_feasible_and_idempotent():
    rng = np.random.default_rng(8)
    lo, hi = np.full(3, -20.0), np.full(3, 20.0)
    for _ in range(25):
        A = rng.integers(-10, 11, (4, 3))
        b = A @ rng.integers(1, 11, 3) + rng.integers(1, 11, 4)
        anchor = rng.integers(-20, 21, 3).astype(float)
        x = project_l1(A, b, lo, hi, anchor)
        assert np.max(A @ x - b) <= 1e-6
        want = oracles.l1_projection_distance(A, b, lo, hi, anchor)
        assert abs(np.abs(x - anchor).sum() - want) <= 1e-6
        np.testing.assert_allclose(project_l1(A, b, lo, hi, x), x, atol=1e-9)
