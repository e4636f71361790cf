"""Oracle checks runnable from the command line (``sfpump selftest``)."""
from __future__ import annotations

import numpy as np

from . import oracles
from .harness import summarize
from .instance import check, generate
from .lp import DenseLp, LpStatus, project_l1, solve_lp
from .policy import Critic, Policy, batch_obs
from .env import SfpEnv, EnvConfig
from .ppo import compute_gae


def _lp_oracle(rng, trials):
    worst = 0.0
    for _ in range(trials):
        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 9))
        A = rng.integers(-10, 11, (m, n))
        b = rng.integers(-10, 11, m)
        c = rng.integers(-10, 11, n)
        lo, hi = np.full(n, -20.0), np.full(n, 20.0)
        want, _ = oracles.vertex_enumeration(c, A, b, lo, hi)
        got = solve_lp(DenseLp(c, A, b, lo, hi))
        if want is None:
            if got.status is LpStatus.OPTIMAL:
                return False, "solver optimal on an empty polytope"
            continue
        if got.status is not LpStatus.OPTIMAL:
            return False, f"solver {got.status.value}, oracle found {want}"
        worst = max(worst, abs(got.objective_value - want))
    return worst <= 1e-6, f"max |objective error| {worst:.2e}"


def _projection_oracle(rng, trials):
    worst = 0.0
    for s in range(trials):
        inst = generate(int(rng.integers(2**31)), 3, int(rng.integers(2, 6)))
        anchor = rng.integers(-20, 21, 3).astype(float)
        x = project_l1(inst.A, inst.b, inst.lower, inst.upper, anchor)
        want = oracles.l1_projection_distance(inst.A, inst.b, inst.lower, inst.upper, anchor)
        worst = max(worst, abs(np.abs(x - anchor).sum() - want))
    return worst <= 1e-6, f"max |distance error| {worst:.2e}"


def _checker(rng, trials):
    for s in range(trials):
        inst = generate(int(rng.integers(2**31)), 5, 6, "MIP")
        x = rng.normal(0, 8, 5)
        snap = rng.random(5) < 0.5
        x[snap] = np.round(x[snap])
        rep = check(inst, x)
        viol, gap = oracles.naive_check(inst.A.tolist(), inst.b.tolist(), inst.int_mask.tolist(), x.tolist())
        if abs(rep.constraint_violation - viol) > 1e-9 or abs(rep.integrality_violation - gap) > 1e-12:
            return False, "feasibility report differs from the naive checker"
    return True, f"{trials} random points agree"


def _gae(rng):
    T = 40
    ids = np.sort(rng.integers(0, 5, T))
    dones = np.r_[ids[1:] != ids[:-1], True].astype(float)
    r, v = rng.normal(size=T), rng.normal(size=T)
    adv, _ = compute_gae(r, v, dones, ids, 0.97, 0.9)
    ref = oracles.gae_by_summation(r, v, dones, ids, 0.97, 0.9)
    err = float(np.max(np.abs(adv - ref)))
    return err < 1e-10, f"max error {err:.1e}"


def _gradients(rng):
    inst = generate(3, 2, 3)
    env = SfpEnv(EnvConfig(variant="mlp"))
    obs = [env.reset(inst)]
    X = batch_obs(obs, "mlp")
    worst = 0.0
    for net in (Policy("mlp", 2, 3, rng=1), Critic("mlp", 2, 3, rng=2)):
        up = rng.normal(size=(1, 2)) if isinstance(net, Policy) else rng.normal(size=1)

        def f():
            out = net.forward(X)
            return float(np.sum((out[0] if isinstance(net, Policy) else out) * up))

        net.zero_grad()
        f()
        net.backward(up)
        for name, arr in net.parameters().items():
            if name == "log_std":
                continue
            num = oracles.central_difference(f, arr)
            ana = net.gradients()[name]
            denom = max(np.linalg.norm(num), np.linalg.norm(ana), 1e-12)
            worst = max(worst, float(np.linalg.norm(num - ana) / denom))
    return worst < 1e-4, f"max relative error {worst:.1e}"


def _quantiles(rng):
    for _ in range(50):
        s = rng.integers(1, 101, int(rng.integers(1, 40)))
        row = summarize(s, 100)
        if abs(row.q10 - oracles.quantile_by_sorting(s, 0.1)) > 1e-9 or \
                abs(row.q90 - oracles.quantile_by_sorting(s, 0.9)) > 1e-9:
            return False, "quantile mismatch"
    return True, "50 random samples agree"


def run_selftest(quick=True) -> bool:
    rng = np.random.default_rng(2024)
    scale = 1 if quick else 5
    checks = [
        ("lp vs vertex enumeration", lambda: _lp_oracle(rng, 40 * scale)),
        ("L1 projection vs vertex enumeration", lambda: _projection_oracle(rng, 10 * scale)),
        ("feasibility report vs naive loops", lambda: _checker(rng, 100 * scale)),
        ("GAE vs explicit summation", lambda: _gae(rng)),
        ("backprop vs central differences", lambda: _gradients(rng)),
        ("quantiles vs sorting", lambda: _quantiles(rng)),
    ]
    ok = True
    for name, fn in checks:
        passed, detail = fn()
        ok &= passed
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return ok
