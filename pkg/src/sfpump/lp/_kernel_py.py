"""Pure-Python (numpy) simplex kernel.

Mirrors ``_kernel.pyx`` operation for operation so both backends walk the
same pivot sequence.  Used when the compiled extension is unavailable or
when ``SFPUMP_PURE_PYTHON=1``.
"""
import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
MAX_PIVOTS = 2


def pivot(T, basis, row, col):
    """Gauss-Jordan pivot of tableau ``T`` on ``(row, col)`` in place."""
    T[row] /= T[row, col]
    T[row, col] = 1.0
    factors = T[:, col].copy()
    factors[row] = 0.0
    nz = np.nonzero(factors)[0]
    if nz.size:
        T[nz] -= np.outer(factors[nz], T[row])
        T[nz, col] = 0.0
    basis[row] = col


def run_phase(T, basis, n_enter, max_pivots, tol, bland_after):
    """Run primal simplex pivots until optimal, unbounded, or out of budget.

    The last row of ``T`` holds reduced costs (minimisation), the last column
    the basic values.  Only columns ``< n_enter`` may enter.  Dantzig pricing
    is used until ``bland_after`` consecutive degenerate pivots, then the
    least-index rule for the remainder of the phase.

    Returns ``(status, pivots)``.
    """
    n_rows = T.shape[0] - 1
    rhs_col = T.shape[1] - 1
    pivots = 0
    streak = 0
    bland = False
    while True:
        cost = T[n_rows, :n_enter]
        if bland:
            cand = np.nonzero(cost < -tol)[0]
            if cand.size == 0:
                return OPTIMAL, pivots
            col = int(cand[0])
        else:
            col = int(np.argmin(cost))
            if cost[col] >= -tol:
                return OPTIMAL, pivots
        if pivots >= max_pivots:
            return MAX_PIVOTS, pivots

        row = -1
        best = 0.0
        for i in range(n_rows):
            a = T[i, col]
            if a > tol:
                ratio = T[i, rhs_col] / a
                if row < 0 or ratio < best - tol:
                    row, best = i, ratio
                elif ratio <= best + tol and basis[i] < basis[row]:
                    row, best = i, ratio
        if row < 0:
            return UNBOUNDED, pivots

        if best <= tol:
            streak += 1
            if streak >= bland_after:
                bland = True
        else:
            streak = 0
        pivot(T, basis, row, col)
        pivots += 1
