import math

import numpy as np
import pytest

from sfpump import oracles
from sfpump.env import EnvConfig, SfpEnv
from sfpump.instance import generate
from sfpump.nn import BackwardWithoutForward, Conv2d, Dense, ShapeMismatch
from sfpump.policy import (CheckpointError, Critic, Policy, batch_obs, gaussian_log_prob,
                           load_checkpoint, mlp_input_scale, read_checkpoint_meta,
                           sample_action, save_checkpoint)

N, M = 3, 4


def observations(variant, count=3, n=N, m=M, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for s in range(count):
        env = SfpEnv(EnvConfig(variant=variant))
        env.reset(generate(100 + s, n, m, "MIP"))
        # random states keep the check away from the single start point
        env.state.x = np.round(rng.normal(0, 8, n))
        env.state.x_tilde = rng.normal(0, 8, n)
        out.append(env.observation())
    return batch_obs(out, variant)


def scales(net):
    t = net.trunk
    return t.scale if net.variant.value == "mlp" else (t.grid_scale, t.side_scale)


@pytest.mark.parametrize("variant", ["mlp", "cnn"])
def test_zero_weights_give_zero_mean(variant):
    pol = Policy(variant, N, M, rng=0)
    pol.head.params["W"][:] = 0
    mean, log_std = pol.forward(observations(variant))
    assert np.all(mean == 0) and np.all(log_std == 0)


@pytest.mark.parametrize("variant", ["mlp", "cnn"])
@pytest.mark.parametrize("cls", [Policy, Critic])
def test_forward_matches_naive_loops(variant, cls):
    net = cls(variant, N, M, rng=3)
    for p in net.parameters().values():
        p += np.random.default_rng(1).normal(0, 0.3, p.shape)
    X = observations(variant)
    out = net.forward(X)
    out = out[0] if cls is Policy else out[:, None]
    ref = oracles.naive_network(net.parameters(), variant, X, scales(net))
    assert np.max(np.abs(out - ref)) <= 1e-10 * max(1.0, np.max(np.abs(ref)))


def test_sampling_statistics():
    pol = Policy("mlp", N, M, rng=0)
    mean, _ = pol.forward(batch_obs(_single("mlp"), "mlp"))
    pol.log_std[:] = -5.0
    a, _ = pol.act(_single("mlp"), [np.random.default_rng(0)])
    assert np.max(np.abs(a - mean)) < 0.05
    pol.log_std[:] = 0.0
    assert gaussian_log_prob(mean, pol.log_std, mean)[0] == pytest.approx(-N / 2 * math.log(2 * math.pi))
    count = 100_000
    rngs = [np.random.default_rng(i) for i in range(count)]
    draws, _ = pol.act(_single("mlp") * count, rngs)
    assert np.max(np.abs(draws.mean(axis=0) - mean[0])) < 4 / math.sqrt(count)
    assert np.max(np.abs(draws.std(axis=0) - 1.0)) < 0.02


def _single(variant):
    env = SfpEnv(EnvConfig(variant=variant))
    return [env.reset(generate(100, N, M, "MIP"))]


def test_sample_action_returns_log_prob():
    pol = Policy("cnn", N, M, rng=0)
    obs = _single("cnn")[0]
    a, lp = sample_action(pol, obs, np.random.default_rng(5))
    mean, log_std = pol.forward(batch_obs([obs], "cnn"))
    assert lp == pytest.approx(gaussian_log_prob(mean, log_std, a[None])[0])


def _fd_check(net, X, rng, per_tensor=25):
    is_policy = isinstance(net, Policy)
    up = rng.normal(size=(X[0].shape[0] if isinstance(X, tuple) else X.shape[0], net.n)) \
        if is_policy else rng.normal(size=(X[0].shape[0] if isinstance(X, tuple) else X.shape[0]))
    up_std = rng.normal(size=net.n) if is_policy else None

    def f():
        out = net.forward(X)
        if is_policy:
            return float(np.sum(out[0] * up) + np.sum(out[1] * up_std))
        return float(np.sum(out * up))

    net.zero_grad()
    f()
    if is_policy:
        net.backward(up, up_std)
    else:
        net.backward(up)
    worst = 0.0
    for name, arr in net.parameters().items():
        flat = rng.permutation(arr.size)[:per_tensor]
        idx = [np.unravel_index(i, arr.shape) for i in flat]
        num = oracles.central_difference(f, arr, h=1e-5, indices=idx)
        ana = np.zeros_like(arr)
        for i in idx:
            ana[i] = net.gradients()[name][i]
        denom = max(np.linalg.norm(num), np.linalg.norm(ana), 1e-12)
        worst = max(worst, float(np.linalg.norm(num - ana) / denom))
    return worst


@pytest.mark.parametrize("variant,cls", [("mlp", Policy), ("mlp", Critic), ("cnn", Policy), ("cnn", Critic)])
def test_backprop_against_finite_differences(variant, cls):
    rng = np.random.default_rng(7)
    for draw in range(3):
        net = cls(variant, 2, 3, rng=draw)
        assert _fd_check(net, observations(variant, 2, 2, 3, seed=draw), rng) < 1e-4


def test_cnn_sees_row_order():
    pol = Policy("cnn", N, M, rng=0)
    grid, side = observations("cnn", 1)
    swapped = grid[:, :, [1, 0, 2, 3], :]
    assert not np.allclose(pol.forward((grid, side))[0], pol.forward((swapped, side))[0])


def test_log_std_stays_clamped():
    pol = Policy("mlp", N, M, rng=0)
    pol.log_std[:] = [10.0, -10.0, 0.0]
    pol.clamp_log_std()
    assert pol.log_std.tolist() == [2.0, -5.0, 0.0]


def test_zero_upstream_gives_zero_gradients():
    pol = Policy("cnn", N, M, rng=0)
    pol.zero_grad()
    pol.forward(observations("cnn"))
    pol.backward(np.zeros((3, N)), np.zeros(N))
    assert all(np.all(g == 0) for g in pol.gradients().values())


def test_backward_needs_forward():
    d = Dense(2, 2, np.random.default_rng(0))
    with pytest.raises(BackwardWithoutForward):
        d.backward(np.ones((1, 2)))
    with pytest.raises(ShapeMismatch):
        Conv2d(1, 2, np.random.default_rng(0)).forward(np.ones((1, 3, 4, 4)))


def test_gaussian_score_matches_closed_form():
    rng = np.random.default_rng(0)
    mean, log_std, a = rng.normal(size=(1, 4)), rng.normal(size=4) * 0.3, rng.normal(size=(1, 4))
    h = 1e-6
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        num = (gaussian_log_prob(mean + e, log_std, a) - gaussian_log_prob(mean - e, log_std, a)) / (2 * h)
        assert num[0] == pytest.approx((a - mean)[0, j] * math.exp(-2 * log_std[j]), rel=1e-6)
        num = (gaussian_log_prob(mean, log_std + e, a) - gaussian_log_prob(mean, log_std - e, a)) / (2 * h)
        want = ((a - mean)[0, j] ** 2) * math.exp(-2 * log_std[j]) - 1
        assert num[0] == pytest.approx(want, rel=1e-6, abs=1e-8)


def test_parameter_counts():
    n, m = 5, 6
    L = m * n + m + 3 * n
    trunk = L * 64 + 64 + 64 * 64 + 64
    assert Policy("mlp", n, m, rng=0).num_parameters() == trunk + 64 * n + n + n
    assert Critic("mlp", n, m, rng=0).num_parameters() == trunk + 65
    conv = (9 * 8 + 8) + (8 * 9 * 16 + 16)
    side = 3 * n * 64 + 64
    fuse = (16 * m * (n + 1) + 64) * 64 + 64 + 64 * 64 + 64
    assert Policy("cnn", n, m, rng=0).num_parameters() == conv + side + fuse + 64 * n + 2 * n


def test_input_scale_layout():
    s = mlp_input_scale(2, 3)
    assert s.size == 6 + 3 + 2 + 2 + 2
    assert s[-1] == 1.0


def test_checkpoint_round_trip(tmp_path):
    pol, cri = Policy("cnn", N, M, rng=1), Critic("cnn", N, M, rng=2)
    pol.log_std[:] = -0.3
    path = tmp_path / "ck.npz"
    save_checkpoint(pol, cri, path, {"note": 1})
    p2, c2, meta = load_checkpoint(path, expect={"n": N, "m": M, "variant": "cnn"})
    X = observations("cnn")
    np.testing.assert_array_equal(pol.forward(X)[0], p2.forward(X)[0])
    np.testing.assert_array_equal(cri.forward(X), c2.forward(X))
    assert read_checkpoint_meta(path)["extra"] == {"note": 1}
    with pytest.raises(CheckpointError):
        load_checkpoint(path, expect={"n": N + 1, "m": M, "variant": "cnn"})
    (tmp_path / "junk.npz").write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "junk.npz")
