"""The feasibility-search MDP.

State is the current integral point ``x_t`` plus a reference point ``x~``:
the L1 projection of ``x_t`` (MLP variant, refreshed every step) or the
projection of the start point frozen for the episode (CNN variant).  An
action is a real displacement; the next point is ``round(x_t + a_t)`` on
the integer coordinates.

Observation layout (version ``OBS_LAYOUT_VERSION``), MLP flat vector::

    [ A row-major (m*n) | b (m) | x_t (n) | x~ (n) | int_mask (n) ]

CNN observation: ``matrix`` = ``[A | b]`` as an ``m x (n+1)`` grid,
``sols`` = ``[x_t | x~_0]``, ``mask`` = ``int_mask``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .instance import FeasibilityReport, MipInstance, check, relaxation, round_partial
from .lp import LpStatus, project_l1, solve_lp

OBS_LAYOUT_VERSION = 1


class Variant(enum.Enum):
    MLP = "mlp"
    CNN = "cnn"


class RewardNorm(enum.Enum):
    POSITIVE_PART_L1 = "positive_part_l1"
    POSITIVE_PART_L2 = "positive_part_l2"
    PLAIN_L2 = "plain_l2"


class StepAfterDone(RuntimeError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    max_steps: int = 100
    variant: Variant = Variant.MLP
    reward_norm: RewardNorm = RewardNorm.POSITIVE_PART_L1
    action_clip: float = 10.0
    # False freezes x~ at the start projection even for the MLP variant
    project_every_step: bool = True

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "reward_norm", RewardNorm(self.reward_norm))
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if not self.action_clip > 0:
            raise ValueError("action_clip must be positive")

    @property
    def reprojects(self) -> bool:
        return self.variant is Variant.MLP and self.project_every_step


@dataclass(frozen=True)
class MlpObs:
    flat: np.ndarray


@dataclass(frozen=True)
class CnnObs:
    matrix: np.ndarray
    sols: np.ndarray
    mask: np.ndarray


def mlp_obs_length(n: int, m: int) -> int:
    return m * n + m + 3 * n


def mlp_offsets(n: int, m: int) -> dict[str, slice]:
    """Slices of each block in the flat MLP observation."""
    edges = np.cumsum([0, m * n, m, n, n, n])
    names = ("A", "b", "x", "x_tilde", "mask")
    return {k: slice(int(edges[i]), int(edges[i + 1])) for i, k in enumerate(names)}


def encode(inst: MipInstance, x, x_tilde, variant: Variant):
    if Variant(variant) is Variant.MLP:
        flat = np.concatenate([inst.A.ravel(), inst.b, x, x_tilde, inst.int_mask]).astype(float)
        return MlpObs(flat)
    matrix = np.hstack([inst.A, inst.b[:, None]]).astype(float)
    return CnnObs(matrix, np.concatenate([x, x_tilde]).astype(float), inst.int_mask.astype(float))


def violation_norm(residual, norm: RewardNorm) -> float:
    if norm is RewardNorm.POSITIVE_PART_L1:
        return float(np.sum(np.maximum(residual, 0.0)))
    if norm is RewardNorm.POSITIVE_PART_L2:
        return float(np.linalg.norm(np.maximum(residual, 0.0)))
    return float(np.linalg.norm(residual))


@dataclass
class EnvState:
    inst: MipInstance
    x: np.ndarray
    x_tilde: np.ndarray
    t: int = 0
    done: bool = False
    feasible: bool = False
    projection_solves: int = 0
    lp_solves: int = 0

    @property
    def episode_length(self) -> int:
        return max(self.t, 1)


@dataclass
class StepOutcome:
    obs: MlpObs | CnnObs
    reward: float
    done: bool
    info: FeasibilityReport


class SfpEnv:
    """One environment; call :meth:`reset` with an instance, then :meth:`step`."""

    def __init__(self, config: EnvConfig | None = None):
        self.config = config or EnvConfig()
        self.state: EnvState | None = None

    def _project(self, x):
        inst = self.state.inst
        self.state.projection_solves += 1
        self.state.lp_solves += 1
        return project_l1(inst.A, inst.b, inst.lower, inst.upper, x)

    def reset(self, inst: MipInstance):
        relax = solve_lp(relaxation(inst))
        if relax.status is not LpStatus.OPTIMAL:
            raise RuntimeError(f"continuous relaxation is {relax.status.value}")
        x0 = round_partial(np.clip(relax.point, inst.lower, inst.upper), inst.int_mask)
        self.state = EnvState(inst, x0, x0, lp_solves=1)
        # a feasible anchor projects onto itself without a solve, but is still
        # counted so every episode starts with exactly one projection
        self.state.x_tilde = self._project(x0)
        if check(inst, x0).feasible:
            self.state.done = True
            self.state.feasible = True
        return self.observation()

    def observation(self):
        s = self.state
        return encode(s.inst, s.x, s.x_tilde, self.config.variant)

    def step(self, action) -> StepOutcome:
        s = self.state
        if s is None or s.done:
            raise StepAfterDone("step() on a finished episode; call reset()")
        inst = s.inst
        a = np.asarray(action, dtype=float).reshape(-1)
        if a.size != inst.n:
            raise ValueError(f"action must have length {inst.n}")
        a = np.clip(a, -self.config.action_clip, self.config.action_clip)
        x = round_partial(np.clip(s.x + a, inst.lower, inst.upper), inst.int_mask)
        s.x = x
        s.t += 1
        report = check(inst, x)
        reward = -violation_norm(inst.A @ x - inst.b, self.config.reward_norm)
        if report.feasible:
            s.feasible = True
            if self.config.reprojects:
                s.x_tilde = x.copy()
        elif self.config.reprojects:
            s.x_tilde = self._project(x)
        s.done = report.feasible or s.t >= self.config.max_steps
        return StepOutcome(self.observation(), reward, s.done, report)
