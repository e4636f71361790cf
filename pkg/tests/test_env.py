import numpy as np
import pytest

from sfpump.env import (CnnObs, EnvConfig, MlpObs, RewardNorm, SfpEnv, StepAfterDone, Variant,
                        mlp_obs_length, mlp_offsets, violation_norm)
from sfpump.fp import run_fp
from sfpump.instance import Kind, MipInstance, check, generate


def infeasible_start(n=5, m=6, kind="IP", start=0):
    for seed in range(start, start + 500):
        inst = generate(seed, n, m, kind)
        env = SfpEnv(EnvConfig())
        env.reset(inst)
        if not env.state.done:
            return inst
    raise AssertionError("no instance with an infeasible start")


def test_feasible_start_is_done_at_reset():
    inst = MipInstance(A=np.array([[1, 1]]), b=np.array([4]), c=np.array([1, 1]),
                       int_mask=np.array([1, 1]), lower_bound=-20, upper_bound=20,
                       seed=0, kind=Kind.IP, witness=None)
    env = SfpEnv()
    env.reset(inst)
    assert env.state.done and env.state.episode_length == 1
    assert env.state.projection_solves == 1 and np.array_equal(env.state.x_tilde, env.state.x)
    with pytest.raises(StepAfterDone):
        env.step(np.zeros(2))


def test_variants_share_the_start_point():
    inst = infeasible_start()
    a, b = SfpEnv(EnvConfig(variant="mlp")), SfpEnv(EnvConfig(variant="cnn"))
    a.reset(inst), b.reset(inst)
    assert np.array_equal(a.state.x, b.state.x)
    assert np.array_equal(a.state.x_tilde, b.state.x_tilde)


def test_mlp_observation_decodes_by_offsets():
    inst = infeasible_start(kind="MIP")
    env = SfpEnv(EnvConfig(variant="mlp"))
    obs = env.reset(inst)
    assert isinstance(obs, MlpObs) and obs.flat.size == mlp_obs_length(inst.n, inst.m)
    off = mlp_offsets(inst.n, inst.m)
    np.testing.assert_array_equal(obs.flat[off["A"]].reshape(inst.m, inst.n), inst.A)
    np.testing.assert_array_equal(obs.flat[off["b"]], inst.b)
    np.testing.assert_array_equal(obs.flat[off["x"]], env.state.x)
    np.testing.assert_array_equal(obs.flat[off["x_tilde"]], env.state.x_tilde)
    np.testing.assert_array_equal(obs.flat[off["mask"]], inst.int_mask)


def test_cnn_observation_shapes():
    inst = infeasible_start()
    env = SfpEnv(EnvConfig(variant="cnn"))
    obs = env.reset(inst)
    assert isinstance(obs, CnnObs)
    assert obs.matrix.shape == (inst.m, inst.n + 1)
    np.testing.assert_array_equal(obs.matrix[:, -1], inst.b)
    np.testing.assert_array_equal(obs.sols, np.concatenate([env.state.x, env.state.x_tilde]))


def test_zero_action_is_a_fixed_point():
    inst = infeasible_start()
    env = SfpEnv()
    env.reset(inst)
    x0 = env.state.x.copy()
    r1 = env.step(np.zeros(inst.n)).reward
    r2 = env.step(np.zeros(inst.n)).reward
    assert np.array_equal(env.state.x, x0)
    assert r1 < 0 and r1 == r2


def test_action_to_a_feasible_point_ends_with_zero_reward():
    inst = infeasible_start()
    env = SfpEnv(EnvConfig(action_clip=40.0))
    env.reset(inst)
    out = env.step(inst.witness - env.state.x)
    assert out.done and out.reward == 0.0 and out.info.feasible


def test_reward_matches_naive_loop():
    rng = np.random.default_rng(4)
    inst = infeasible_start(kind="MIP")
    env = SfpEnv(EnvConfig(max_steps=100))
    env.reset(inst)
    for _ in range(30):
        if env.state.done:
            break
        out = env.step(rng.normal(0, 3, inst.n))
        x = env.state.x
        naive = 0.0
        for i in range(inst.m):
            row = sum(float(inst.A[i, j]) * x[j] for j in range(inst.n)) - float(inst.b[i])
            naive += max(0.0, row)
        assert out.reward == pytest.approx(-naive, abs=1e-9)
        assert (out.reward == 0) == check(inst, x).feasible


def test_other_norms():
    r = np.array([3.0, -4.0])
    assert violation_norm(r, RewardNorm.POSITIVE_PART_L1) == 3.0
    assert violation_norm(r, RewardNorm.POSITIVE_PART_L2) == 3.0
    assert violation_norm(r, RewardNorm.PLAIN_L2) == 5.0


@pytest.mark.parametrize("kind", ["IP", "MIP"])
def test_integrality_and_clipping(kind):
    rng = np.random.default_rng(1)
    inst = infeasible_start(kind=kind)
    env = SfpEnv(EnvConfig(action_clip=2.0))
    env.reset(inst)
    mask = inst.int_mask.astype(bool)
    while not env.state.done:
        before = env.state.x.copy()
        env.step(rng.normal(0, 50, inst.n))
        x = env.state.x
        assert np.all(x[mask] == np.round(x[mask]))
        assert np.all(np.abs(x - before) <= 2.5)
        assert np.all(np.abs(x) <= 20)
    assert 1 <= env.state.episode_length <= 100


def test_lp_solve_counts_per_variant():
    inst = infeasible_start()
    rng = np.random.default_rng(2)
    actions = [rng.normal(0, 1, inst.n) for _ in range(100)]
    counts = {}
    for variant in ("mlp", "cnn"):
        env = SfpEnv(EnvConfig(variant=variant, max_steps=20))
        env.reset(inst)
        for a in actions:
            if env.state.done:
                break
            env.step(a)
        counts[variant] = (env.state.projection_solves, env.state.t, env.state.feasible)
    assert counts["cnn"][0] == 1
    t, feasible = counts["mlp"][1], counts["mlp"][2]
    assert counts["mlp"][0] == 1 + t - int(feasible)


def test_trajectories_are_deterministic():
    inst = infeasible_start(kind="MIP")
    actions = np.random.default_rng(3).normal(0, 2, (15, inst.n))
    runs = []
    for _ in range(2):
        env = SfpEnv(EnvConfig(max_steps=15))
        env.reset(inst)
        traj = []
        for a in actions:
            if env.state.done:
                break
            out = env.step(a)
            traj.append((env.state.x.tobytes(), env.state.x_tilde.tobytes(), out.reward))
        runs.append(traj)
    assert runs[0] == runs[1]


def test_bad_config_and_action():
    with pytest.raises(ValueError):
        EnvConfig(max_steps=0)
    with pytest.raises(ValueError):
        EnvConfig(action_clip=0)
    env = SfpEnv()
    env.reset(infeasible_start())
    with pytest.raises(ValueError):
        env.step(np.zeros(3))
