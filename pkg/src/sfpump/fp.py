"""The classic feasibility pump: alternate L1 projection and rounding."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .instance import MipInstance, check, relaxation, round_partial
from .lp import LpStatus, project_l1, solve_lp


class Termination(enum.Enum):
    FOUND_FEASIBLE = "found_feasible"
    STEP_LIMIT = "step_limit"


@dataclass
class TraceRecord:
    step: int
    x: np.ndarray | None
    x_bar: np.ndarray
    l1_distance: float
    event: str

    def to_json(self) -> str:
        return json.dumps({
            "step": self.step,
            "event": self.event,
            "x": None if self.x is None else [float(v) for v in self.x],
            "x_bar": [float(v) for v in self.x_bar],
            "l1_distance": float(self.l1_distance),
        })


@dataclass
class FpResult:
    steps_taken: int
    solution: np.ndarray | None
    terminated_by: Termination
    perturbation_count: int = 0
    lp_solves: int = 0
    trace: list[TraceRecord] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.terminated_by is Termination.FOUND_FEASIBLE


def perturb(x_bar, int_mask, lower, upper, rng) -> np.ndarray:
    """Move each integer coordinate by +-1 with probability 1/2, clamped to the box.

    Redrawn until at least one coordinate actually changes.
    """
    idx = np.flatnonzero(int_mask)
    while True:
        flip = rng.random(idx.size) < 0.5
        sign = np.where(rng.random(idx.size) < 0.5, -1.0, 1.0)
        out = x_bar.copy()
        out[idx] = np.clip(x_bar[idx] + flip * sign, lower[idx], upper[idx])
        if np.any(out != x_bar):
            return out


def run_fp(inst: MipInstance, max_steps: int = 100, rng_seed: int = 0,
           detect_revisits: bool = True) -> FpResult:
    """Run the feasibility pump from the rounded relaxation optimum.

    A counted step is one projection followed by rounding.  When rounding
    reproduces the previous point (or, with ``detect_revisits``, any point
    seen before) the integer coordinates are perturbed; a perturbation after
    an exact repeat does not consume a step.  Total loop iterations are
    hard-capped at ``10 * max_steps``.

    An already-feasible rounded start reports one step.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    rng = np.random.default_rng(rng_seed)
    lo, hi = inst.lower, inst.upper
    mask = inst.int_mask

    start = solve_lp(relaxation(inst))
    if start.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"continuous relaxation is {start.status.value}")
    lp_solves = 1
    x = start.point
    x_bar = round_partial(x, mask)
    trace = [TraceRecord(0, x, x_bar, float(np.abs(x - x_bar).sum()), "init")]
    int_idx = np.flatnonzero(mask)

    def key(v):
        return v[int_idx].tobytes()

    visited = {key(x_bar)}
    perturbations = 0
    k = 0

    def done(found):
        steps = max(k, 1) if found else max_steps
        term = Termination.FOUND_FEASIBLE if found else Termination.STEP_LIMIT
        return FpResult(steps, x_bar.copy() if found else None, term,
                        perturbations, lp_solves, trace)

    for _ in range(10 * max_steps):
        if check(inst, x_bar).feasible:
            return done(True)
        if k >= max_steps:
            break
        x = project_l1(inst.A, inst.b, lo, hi, x_bar)
        lp_solves += 1
        new_bar = round_partial(x, mask)
        dist = float(np.abs(x - x_bar).sum())
        if np.array_equal(new_bar[int_idx], x_bar[int_idx]):
            x_bar = perturb(new_bar, mask, lo, hi, rng)
            perturbations += 1
            trace.append(TraceRecord(k, x, x_bar, dist, "perturb"))
        else:
            k += 1
            x_bar = new_bar
            event = "step"
            if detect_revisits and key(x_bar) in visited:
                x_bar = perturb(x_bar, mask, lo, hi, rng)
                perturbations += 1
                event = "revisit-perturb"
            trace.append(TraceRecord(k, x, x_bar, dist, event))
        visited.add(key(x_bar))
    return done(False)


def write_trace(result: FpResult, fh) -> None:
    for rec in result.trace:
        fh.write(rec.to_json() + "\n")
