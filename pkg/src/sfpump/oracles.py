"""Independent reference computations (brute force, enumeration, naive loops).

Used by the test-suite and by ``sfpump selftest``; nothing here imports the
solver code it is meant to check.
"""
import itertools
import math

import numpy as np


def vertex_enumeration(c, A, b, lo, hi, tol=1e-9):
    """Optimum of ``min c@x, A x <= b, lo <= x <= hi`` by enumerating vertices.

    Every ``n``-subset of the constraints (rows and bound faces) is solved as
    an equality system; feasible solutions are the polytope's vertices.
    Returns ``(best_value, best_point)`` or ``(None, None)`` if empty.
    """
    c = np.asarray(c, float)
    n = c.size
    G = np.vstack([np.asarray(A, float).reshape(-1, n), np.eye(n), -np.eye(n)])
    h = np.concatenate([np.asarray(b, float), np.asarray(hi, float), -np.asarray(lo, float)])
    idx = np.array(list(itertools.combinations(range(G.shape[0]), n)))
    best_val, best_x = None, None
    for chunk in np.array_split(idx, max(1, len(idx) // 20000 + 1)):
        M = G[chunk]
        rhs = h[chunk]
        det = np.linalg.det(M)
        ok = np.abs(det) > 1e-9
        if not ok.any():
            continue
        X = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
        feas = np.all(X @ G.T <= h + tol * (1 + np.abs(h)), axis=1)
        if not feas.any():
            continue
        X = X[feas]
        vals = X @ c
        k = int(np.argmin(vals))
        if best_val is None or vals[k] < best_val:
            best_val, best_x = float(vals[k]), X[k]
    return best_val, best_x


def l1_projection_distance(A, b, lo, hi, anchor):
    """Minimal L1 distance from ``anchor`` to the polytope, via vertex enumeration
    of the lifted ``(x, t)`` problem."""
    anchor = np.asarray(anchor, float)
    n = anchor.size
    A = np.asarray(A, float).reshape(-1, n)
    eye = np.eye(n)
    G = np.block([[A, np.zeros((A.shape[0], n))], [eye, -eye], [-eye, -eye]])
    h = np.concatenate([np.asarray(b, float), anchor, -anchor])
    lo = np.broadcast_to(lo, (n,)).astype(float)
    hi = np.broadcast_to(hi, (n,)).astype(float)
    tmax = np.maximum(np.maximum(hi - anchor, anchor - lo), 0.0)
    c = np.concatenate([np.zeros(n), np.ones(n)])
    return vertex_enumeration(c, G, h, np.concatenate([lo, np.zeros(n)]),
                              np.concatenate([hi, tmax]))[0]


def naive_check(A, b, mask, x):
    """Row-by-row constraint violation and integrality gap."""
    viol = 0.0
    for i in range(len(b)):
        s = 0.0
        for j in range(len(x)):
            s += A[i][j] * x[j]
        if s - b[i] > 0:
            viol += s - b[i]
    gap = 0.0
    for j in range(len(x)):
        if mask[j]:
            gap = max(gap, abs(x[j] - math.floor(x[j] + 0.5)))
    return viol, gap


def find_integer_point(A, b, mask, lo, hi):
    """Exhaustive branch-and-propagate search for a mixed-integer feasible point.

    Every node tightens all variable bounds row by row until nothing moves
    (integer bounds are rounded inwards), then branches on the integer
    variable with the fewest remaining values, centre values first.  With
    all integers fixed, the continuous part is settled by vertex
    enumeration.  Returns a point or None.
    """
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    m, n = A.shape
    is_int = np.asarray(mask, bool)

    def propagate(low, high):
        low, high = low.copy(), high.copy()
        for _ in range(100):
            changed = False
            for i in range(m):
                a = A[i]
                contrib = np.minimum(a * low, a * high)
                total = contrib.sum()
                for j in np.flatnonzero(a):
                    rest = b[i] - (total - contrib[j])
                    if a[j] > 0:
                        cap = rest / a[j]
                        if is_int[j]:
                            cap = math.floor(cap + 1e-9)
                        if cap < high[j] - 1e-12:
                            high[j], changed = cap, True
                    else:
                        cap = rest / a[j]
                        if is_int[j]:
                            cap = math.ceil(cap - 1e-9)
                        if cap > low[j] + 1e-12:
                            low[j], changed = cap, True
                    if low[j] > high[j] + 1e-9:
                        return None
                    contrib[j] = min(a[j] * low[j], a[j] * high[j])
                    total = contrib.sum()
            if not changed:
                break
        return low, high

    def settle(low, high):
        x = low.copy()
        cont = np.flatnonzero(~is_int)
        if cont.size == 0:
            return x if np.all(A @ x <= b + 1e-9) else None
        sub_b = b - A[:, is_int] @ x[is_int]
        val, y = vertex_enumeration(np.zeros(cont.size), A[:, cont], sub_b, low[cont], high[cont])
        if val is None:
            return None
        x[cont] = y
        return x

    def dfs(low, high):
        got = propagate(low, high)
        if got is None:
            return None
        low, high = got
        free = [j for j in np.flatnonzero(is_int) if high[j] > low[j]]
        if not free:
            return settle(low, high)
        j = min(free, key=lambda k: high[k] - low[k])
        values = list(range(int(low[j]), int(high[j]) + 1))
        mid = (low[j] + high[j]) / 2
        for v in sorted(values, key=lambda v: (abs(v - mid), v)):
            lo2, hi2 = low.copy(), high.copy()
            lo2[j] = hi2[j] = v
            res = dfs(lo2, hi2)
            if res is not None:
                return res
        return None

    low = np.broadcast_to(np.asarray(lo, float), (n,)).copy()
    high = np.broadcast_to(np.asarray(hi, float), (n,)).copy()
    return dfs(low, high)


def quantile_by_sorting(values, q):
    """Linear-interpolation quantile from the sorted order statistics."""
    s = sorted(values)
    pos = q * (len(s) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (s[hi] - s[lo]) * (pos - lo)


def gae_by_summation(rewards, values, dones, episode_ids, gamma, lam):
    """Advantages as explicit sums ``sum_k (gamma*lam)^k delta_{t+k}`` per episode."""
    T = len(rewards)
    deltas = []
    for t in range(T):
        last = t == T - 1 or episode_ids[t + 1] != episode_ids[t]
        nxt = 0.0 if (last or dones[t]) else values[t + 1]
        deltas.append(rewards[t] + gamma * nxt - values[t])
    adv = []
    for t in range(T):
        total, k = 0.0, 0
        while t + k < T and episode_ids[t + k] == episode_ids[t]:
            total += (gamma * lam) ** k * deltas[t + k]
            if dones[t + k]:
                break
            k += 1
        adv.append(total)
    return adv


def central_difference(f, arr, h=1e-5, indices=None):
    """Gradient of scalar ``f()`` w.r.t. entries of ``arr`` (perturbed in place).

    ``indices`` restricts the work to some multi-indices; other entries stay 0.
    """
    grad = np.zeros_like(arr)
    for idx in (np.ndindex(arr.shape) if indices is None else indices):
        old = arr[idx]
        arr[idx] = old + h
        up = f()
        arr[idx] = old - h
        down = f()
        arr[idx] = old
        grad[idx] = (up - down) / (2 * h)
    return grad


def naive_dense(x, W, b):
    out = [[0.0] * len(b) for _ in range(len(x))]
    for r in range(len(x)):
        for j in range(len(b)):
            s = b[j]
            for i in range(len(W)):
                s += x[r][i] * W[i][j]
            out[r][j] = s
    return np.array(out)


def naive_conv3x3(x, W, bias):
    """Zero-padded 'same' convolution (cross-correlation) with plain loops."""
    B, C, H, Wd = x.shape
    O = W.shape[0]
    out = np.zeros((B, O, H, Wd))
    for n_ in range(B):
        for o in range(O):
            for i in range(H):
                for j in range(Wd):
                    s = bias[o]
                    for c in range(C):
                        for di in range(3):
                            for dj in range(3):
                                ii, jj = i + di - 1, j + dj - 1
                                if 0 <= ii < H and 0 <= jj < Wd:
                                    s += x[n_, c, ii, jj] * W[o, c, di, dj]
                    out[n_, o, i, j] = s
    return out


def naive_network(params, variant, x, scales):
    """Re-evaluate a policy/critic head output from its named parameters.

    ``scales`` holds the fixed input divisors: one array for the MLP, or
    ``(grid_scale, side_scale)`` for the CNN.
    """
    relu = lambda z: np.where(z > 0, z, 0.0)  # noqa: E731
    if variant == "mlp":
        h = np.tanh(naive_dense(x / scales, params["body.0.W"], params["body.0.b"]))
        h = np.tanh(naive_dense(h, params["body.2.W"], params["body.2.b"]))
    else:
        grid, side = x
        g = relu(naive_conv3x3(grid / scales[0], params["conv.0.W"], params["conv.0.b"]))
        g = relu(naive_conv3x3(g, params["conv.2.W"], params["conv.2.b"]))
        s = np.tanh(naive_dense(side / scales[1], params["side.0.W"], params["side.0.b"]))
        h = np.concatenate([g.reshape(g.shape[0], -1), s], axis=1)
        h = np.tanh(naive_dense(h, params["fuse.0.W"], params["fuse.0.b"]))
        h = np.tanh(naive_dense(h, params["fuse.2.W"], params["fuse.2.b"]))
    return naive_dense(h, params["head.W"], params["head.b"])
