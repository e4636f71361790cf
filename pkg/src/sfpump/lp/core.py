"""Dense two-phase simplex and L1 projection onto a bounded polyhedron."""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-7
OPT_TOL = 1e-6
PIVOT_TOL = 1e-9
BLAND_AFTER = 8

if os.environ.get("SFPUMP_PURE_PYTHON") == "1":
    from . import _kernel_py as _kernel

    BACKEND = "python"
else:
    try:
        from . import _kernel  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _kernel_py as _kernel

        BACKEND = "python"


class LpError(RuntimeError):
    """Base class for solver failures."""


class MaxPivotsExceeded(LpError):
    pass


class LpNumericalError(LpError):
    pass


class ProjectionInfeasible(LpError):
    """The polyhedron to project onto is empty (a caller contract violation)."""


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class DenseLp:
    """``min objective @ x  s.t.  row_matrix @ x <= rhs,  lower <= x <= upper``."""

    objective: np.ndarray
    row_matrix: np.ndarray
    rhs: np.ndarray
    lower_bounds: np.ndarray
    upper_bounds: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        n = c.size
        A = np.asarray(self.row_matrix, dtype=float).reshape(-1, n) if n else np.zeros((0, 0))
        b = np.asarray(self.rhs, dtype=float).ravel()
        lo = np.asarray(self.lower_bounds, dtype=float).ravel()
        hi = np.asarray(self.upper_bounds, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise ValueError(f"row_matrix has {A.shape[0]} rows but rhs has {b.size} entries")
        if lo.size != n or hi.size != n:
            raise ValueError("bounds must have one entry per variable")
        for name, arr in (("objective", c), ("row_matrix", A), ("rhs", b),
                          ("lower_bounds", lo), ("upper_bounds", hi)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if np.any(lo > hi):
            raise ValueError("lower_bounds exceed upper_bounds")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "row_matrix", A)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "lower_bounds", lo)
        object.__setattr__(self, "upper_bounds", hi)

    @property
    def num_vars(self) -> int:
        return self.objective.size

    @property
    def num_rows(self) -> int:
        return self.rhs.size

    def violation(self, x) -> float:
        """Largest violation of any row or bound at ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.num_rows:
            worst = max(worst, float(np.max(self.row_matrix @ x - self.rhs)))
        worst = max(worst, float(np.max(self.lower_bounds - x, initial=0.0)))
        worst = max(worst, float(np.max(x - self.upper_bounds, initial=0.0)))
        return worst


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    point: np.ndarray | None = None
    objective_value: float | None = None
    pivots: int = field(default=0, compare=False)

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def _build_tableau(lp: DenseLp):
    """Shift to ``y = x - lower >= 0`` and lay out the phase-one tableau.

    Rows are the constraint rows followed by one ``y_j <= upper_j - lower_j``
    row per variable.  Rows with a negative right-hand side are negated and
    receive an artificial column.
    """
    n = lp.num_vars
    lo = lp.lower_bounds
    M = np.vstack([lp.row_matrix, np.eye(n)])
    r = np.concatenate([lp.rhs - lp.row_matrix @ lo, lp.upper_bounds - lo])
    n_rows = r.size
    neg = np.nonzero(r < 0)[0]
    n_art = neg.size
    art_start = n + n_rows
    width = art_start + n_art + 1

    T = np.zeros((n_rows + 1, width))
    T[:n_rows, :n] = M
    T[:n_rows, n:art_start] = np.eye(n_rows)
    T[:n_rows, -1] = r
    basis = np.arange(n, art_start, dtype=np.int_)
    if n_art:
        T[neg, :art_start] *= -1.0
        T[neg, -1] *= -1.0
        T[neg, art_start + np.arange(n_art)] = 1.0
        basis[neg] = art_start + np.arange(n_art)
        T[n_rows, :art_start] = -T[neg, :art_start].sum(axis=0)
        T[n_rows, -1] = -T[neg, -1].sum()
    return T, basis, art_start


def solve_lp(lp: DenseLp, max_pivots: int | None = None) -> LpOutcome:
    """Solve ``lp`` with a two-phase dense tableau simplex.

    Pricing is Dantzig's rule, switching to Bland's least-index rule after a
    streak of degenerate pivots, so the method terminates.  A pivot budget
    that is still exhausted raises :class:`MaxPivotsExceeded`.
    """
    n = lp.num_vars
    T, basis, art_start = _build_tableau(lp)
    n_rows = T.shape[0] - 1
    if max_pivots is None:
        max_pivots = 50 * (T.shape[0] + T.shape[1])
    total = 0

    if art_start < T.shape[1] - 1:
        status, piv = _kernel.run_phase(T, basis, T.shape[1] - 1, max_pivots, PIVOT_TOL, BLAND_AFTER)
        total += piv
        if status == _kernel.MAX_PIVOTS:
            raise MaxPivotsExceeded(f"phase one exceeded {max_pivots} pivots")
        if -T[n_rows, -1] > FEAS_TOL * (1.0 + np.abs(T[:n_rows, -1]).max(initial=0.0)):
            return LpOutcome(LpStatus.INFEASIBLE, pivots=total)
        # drive zero-level artificials out of the basis where possible
        for i in range(n_rows):
            if basis[i] >= art_start:
                cand = np.nonzero(np.abs(T[i, :art_start]) > PIVOT_TOL)[0]
                if cand.size:
                    _kernel.pivot(T, basis, i, int(cand[0]))

    cost = np.zeros(T.shape[1] - 1)
    cost[:n] = lp.objective
    cb = cost[basis]
    T[n_rows, :-1] = cost - cb @ T[:n_rows, :-1]
    T[n_rows, -1] = -(cb @ T[:n_rows, -1])
    status, piv = _kernel.run_phase(T, basis, art_start, max_pivots, PIVOT_TOL, BLAND_AFTER)
    total += piv
    if status == _kernel.MAX_PIVOTS:
        raise MaxPivotsExceeded(f"phase two exceeded {max_pivots} pivots")
    if status == _kernel.UNBOUNDED:
        return LpOutcome(LpStatus.UNBOUNDED, pivots=total)

    y = np.zeros(n)
    mask = basis < n
    y[basis[mask]] = T[:n_rows, -1][mask]
    x = np.clip(lp.lower_bounds + y, lp.lower_bounds, lp.upper_bounds)
    if lp.violation(x) > FEAS_TOL:
        raise LpNumericalError(f"optimal point violates constraints by {lp.violation(x):.3g}")
    return LpOutcome(LpStatus.OPTIMAL, x, float(lp.objective @ x), pivots=total)


def project_l1(A, b, lower, upper, anchor) -> np.ndarray:
    """Closest point to ``anchor`` in ``{x : A x <= b, lower <= x <= upper}`` under L1.

    Solved as ``min sum(t)`` with ``-t <= x - anchor <= t``.  An anchor that
    is already feasible is returned unchanged without solving.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    n = anchor.size
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (n,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (n,))

    inside_box = np.all(anchor >= lower) and np.all(anchor <= upper)
    if inside_box and (A.shape[0] == 0 or np.max(A @ anchor - b) <= FEAS_TOL):
        return anchor.copy()

    eye = np.eye(n)
    rows = np.block([
        [A, np.zeros((A.shape[0], n))],
        [eye, -eye],
        [-eye, -eye],
    ])
    rhs = np.concatenate([b, anchor, -anchor])
    t_max = np.maximum(np.maximum(upper - anchor, anchor - lower), 0.0)
    lp = DenseLp(
        objective=np.concatenate([np.zeros(n), np.ones(n)]),
        row_matrix=rows,
        rhs=rhs,
        lower_bounds=np.concatenate([lower, np.zeros(n)]),
        upper_bounds=np.concatenate([upper, t_max]),
    )
    out = solve_lp(lp)
    if out.status is not LpStatus.OPTIMAL:
        raise ProjectionInfeasible(f"projection LP returned {out.status.value}")
    return out.point[:n]
