# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simplex kernel; same contract as ``_kernel_py``."""

OPTIMAL = 0
UNBOUNDED = 1
MAX_PIVOTS = 2

cdef enum:
    _OPTIMAL = 0
    _UNBOUNDED = 1
    _MAX_PIVOTS = 2


cdef void _pivot(double[:, ::1] T, long[::1] basis, Py_ssize_t row, Py_ssize_t col) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef Py_ssize_t n_all = T.shape[0]
    cdef Py_ssize_t n_cols = T.shape[1]
    cdef double p = T[row, col]
    cdef double f
    for k in range(n_cols):
        T[row, k] = T[row, k] / p
    T[row, col] = 1.0
    for i in range(n_all):
        if i == row:
            continue
        f = T[i, col]
        if f != 0.0:
            for k in range(n_cols):
                T[i, k] = T[i, k] - f * T[row, k]
            T[i, col] = 0.0
    basis[row] = col


def pivot(double[:, ::1] T, long[::1] basis, Py_ssize_t row, Py_ssize_t col):
    """Gauss-Jordan pivot of tableau ``T`` on ``(row, col)`` in place."""
    _pivot(T, basis, row, col)


def run_phase(double[:, ::1] T, long[::1] basis, Py_ssize_t n_enter,
              long max_pivots, double tol, long bland_after):
    cdef Py_ssize_t n_rows = T.shape[0] - 1
    cdef Py_ssize_t rhs_col = T.shape[1] - 1
    cdef long pivots = 0
    cdef long streak = 0
    cdef bint bland = False
    cdef Py_ssize_t j, i, col, row
    cdef double c, best, ratio, a
    cdef int status = _OPTIMAL
    with nogil:
        while True:
            col = -1
            if bland:
                for j in range(n_enter):
                    if T[n_rows, j] < -tol:
                        col = j
                        break
            else:
                best = 0.0
                for j in range(n_enter):
                    c = T[n_rows, j]
                    if col < 0 or c < best:
                        col = j
                        best = c
                if best >= -tol:
                    col = -1
            if col < 0:
                status = _OPTIMAL
                break
            if pivots >= max_pivots:
                status = _MAX_PIVOTS
                break

            row = -1
            best = 0.0
            for i in range(n_rows):
                a = T[i, col]
                if a > tol:
                    ratio = T[i, rhs_col] / a
                    if row < 0 or ratio < best - tol:
                        row = i
                        best = ratio
                    elif ratio <= best + tol and basis[i] < basis[row]:
                        row = i
                        best = ratio
            if row < 0:
                status = _UNBOUNDED
                break

            if best <= tol:
                streak += 1
                if streak >= bland_after:
                    bland = True
            else:
                streak = 0
            _pivot(T, basis, row, col)
            pivots += 1
    return status, pivots
