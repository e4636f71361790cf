"""Gaussian policies and critics over the two observation encodings.

Both share a trunk design per variant:

* MLP: flat observation -> 64 tanh -> 64 tanh.
* CNN: ``[A | b]`` grid -> conv3x3(1->8) relu -> conv3x3(8->16) relu -> flatten,
  concatenated with a 64-unit tanh embedding of ``[x_t | x~_0 | mask]``,
  then 64 tanh -> 64 tanh.

A policy puts a linear mean head (``n`` outputs) and a state-independent
``log_std`` on its trunk; a critic puts a scalar head on its own trunk.
Inputs are divided by fixed per-block scales before the first layer.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .env import CnnObs, MlpObs, OBS_LAYOUT_VERSION, Variant, mlp_obs_length, mlp_offsets
from .nn import Conv2d, Dense, NonFiniteActivation, ReLU, Sequential, ShapeMismatch, Tanh

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
HIDDEN = 64
SIDE = 64
CHANNELS = (8, 16)
CHECKPOINT_VERSION = 1
A_SCALE, B_SCALE, X_SCALE = 10.0, 100.0, 20.0
_LOG_2PI = math.log(2.0 * math.pi)


class CheckpointError(ValueError):
    pass


def mlp_input_scale(n, m):
    s = np.ones(mlp_obs_length(n, m))
    off = mlp_offsets(n, m)
    s[off["A"]] = A_SCALE
    s[off["b"]] = B_SCALE
    s[off["x"]] = X_SCALE
    s[off["x_tilde"]] = X_SCALE
    return s


def batch_obs(observations, variant):
    """Stack single observations into the batched network input."""
    variant = Variant(variant)
    if variant is Variant.MLP:
        if not all(isinstance(o, MlpObs) for o in observations):
            raise ShapeMismatch("MLP network needs MlpObs observations")
        return np.stack([o.flat for o in observations])
    if not all(isinstance(o, CnnObs) for o in observations):
        raise ShapeMismatch("CNN network needs CnnObs observations")
    grid = np.stack([o.matrix for o in observations])[:, None]
    side = np.stack([np.concatenate([o.sols, o.mask]) for o in observations])
    return grid, side


class _Trunk:
    """Feature extractor shared in design (not weights) by policy and critic."""

    def __init__(self, variant, n, m, rng):
        self.variant = Variant(variant)
        self.n, self.m = n, m
        if self.variant is Variant.MLP:
            self.scale = mlp_input_scale(n, m)
            self.body = Sequential([Dense(self.scale.size, HIDDEN, rng), Tanh(),
                                    Dense(HIDDEN, HIDDEN, rng), Tanh()])
            self.parts = {"body": self.body}
        else:
            c1, c2 = CHANNELS
            self.grid_scale = np.full(n + 1, A_SCALE)
            self.grid_scale[-1] = B_SCALE
            self.side_scale = np.concatenate([np.full(2 * n, X_SCALE), np.ones(n)])
            self.conv = Sequential([Conv2d(1, c1, rng), ReLU(), Conv2d(c1, c2, rng), ReLU()])
            self.side = Sequential([Dense(3 * n, SIDE, rng), Tanh()])
            self.flat_width = c2 * m * (n + 1)
            self.fuse = Sequential([Dense(self.flat_width + SIDE, HIDDEN, rng), Tanh(),
                                    Dense(HIDDEN, HIDDEN, rng), Tanh()])
            self.parts = {"conv": self.conv, "side": self.side, "fuse": self.fuse}

    def forward(self, x):
        if self.variant is Variant.MLP:
            if x.ndim != 2 or x.shape[1] != self.scale.size:
                raise ShapeMismatch(f"expected MLP input of width {self.scale.size}, got {x.shape}")
            return self.body.forward(x / self.scale)
        grid, side = x
        if grid.shape[1:] != (1, self.m, self.n + 1) or side.shape[1:] != (3 * self.n,):
            raise ShapeMismatch(
                f"expected grid (B, 1, {self.m}, {self.n + 1}) and side (B, {3 * self.n}), "
                f"got {grid.shape} and {side.shape}")
        self._batch = grid.shape[0]
        h = self.conv.forward(grid / self.grid_scale).reshape(self._batch, -1)
        s = self.side.forward(side / self.side_scale)
        return self.fuse.forward(np.concatenate([h, s], axis=1))

    def backward(self, g):
        if self.variant is Variant.MLP:
            self.body.backward(g)
            return
        g = self.fuse.backward(g)
        c2 = CHANNELS[1]
        self.conv.backward(g[:, :self.flat_width].reshape(self._batch, c2, self.m, self.n + 1))
        self.side.backward(g[:, self.flat_width:])

    def named_layers(self):
        for part, seq in self.parts.items():
            for idx, layer in seq.named_layers():
                yield f"{part}.{idx}", layer


class _Net:
    kind = ""

    def __init__(self, variant, n, m, rng, n_out, head_gain):
        self.variant = Variant(variant)
        self.n, self.m = n, m
        self.trunk = _Trunk(variant, n, m, rng)
        self.head = Dense(HIDDEN, n_out, rng, gain=head_gain)

    def layers(self):
        yield from self.trunk.named_layers()
        yield "head", self.head

    def parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self.layers():
            for key, arr in layer.params.items():
                out[f"{name}.{key}"] = arr
        return out

    def gradients(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self.layers():
            for key, arr in layer.grads.items():
                out[f"{name}.{key}"] = arr
        return out

    def zero_grad(self):
        for _, layer in self.layers():
            layer.zero_grad()

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters().values()))

    def binding(self) -> dict:
        return {"n": self.n, "m": self.m, "variant": self.variant.value,
                "obs_layout": OBS_LAYOUT_VERSION}


class Policy(_Net):
    """Diagonal Gaussian policy with a learned, state-independent log std."""

    kind = "policy"

    def __init__(self, variant, n, m, rng=None, init_log_std=0.0):
        rng = np.random.default_rng(rng)
        super().__init__(variant, n, m, rng, n, head_gain=0.01)
        self.log_std = np.full(n, float(init_log_std))
        self.log_std_grad = np.zeros(n)

    def parameters(self):
        out = super().parameters()
        out["log_std"] = self.log_std
        return out

    def gradients(self):
        out = super().gradients()
        out["log_std"] = self.log_std_grad
        return out

    def zero_grad(self):
        super().zero_grad()
        self.log_std_grad = np.zeros(self.n)

    def clamp_log_std(self):
        np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std)

    def forward(self, x):
        """Batched forward: returns ``(mean (B, n), log_std (n,))``."""
        mean = self.head.forward(self.trunk.forward(x))
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(self.log_std)):
            raise NonFiniteActivation("policy produced non-finite output")
        return mean, self.log_std

    def backward(self, grad_mean, grad_log_std=None):
        """Accumulate parameter gradients given upstream ``dL/dmean`` and ``dL/dlog_std``."""
        self.trunk.backward(self.head.backward(grad_mean))
        if grad_log_std is not None:
            self.log_std_grad += grad_log_std

    def act(self, observations, rngs, deterministic=False):
        """Sample one action per observation, each with its own generator.

        Returns ``(actions (B, n), log_probs (B,))``.
        """
        mean, log_std = self.forward(batch_obs(observations, self.variant))
        if deterministic:
            actions = mean.copy()
        else:
            z = np.stack([r.standard_normal(self.n) for r in rngs])
            actions = mean + np.exp(log_std) * z
        return actions, gaussian_log_prob(mean, log_std, actions)


class Critic(_Net):
    kind = "critic"

    def __init__(self, variant, n, m, rng=None):
        rng = np.random.default_rng(rng)
        super().__init__(variant, n, m, rng, 1, head_gain=1.0)

    def forward(self, x):
        v = self.head.forward(self.trunk.forward(x))[:, 0]
        if not np.all(np.isfinite(v)):
            raise NonFiniteActivation("critic produced non-finite output")
        return v

    def backward(self, grad_value):
        self.trunk.backward(self.head.backward(np.asarray(grad_value, float)[:, None]))


def gaussian_log_prob(mean, log_std, actions):
    z = (actions - mean) * np.exp(-log_std)
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * mean.shape[-1] * _LOG_2PI


def gaussian_entropy(log_std) -> float:
    return float(np.sum(log_std) + 0.5 * log_std.size * (1.0 + _LOG_2PI))


def sample_action(policy: Policy, obs, rng):
    """Draw ``a = mean + exp(log_std) * z`` for a single observation."""
    actions, logp = policy.act([obs], [rng])
    return actions[0], float(logp[0])


# -- checkpoints ----------------------------------------------------------------

def save_checkpoint(policy: Policy, critic: Critic, path, extra: dict | None = None) -> None:
    if policy.binding() != critic.binding():
        raise CheckpointError("policy and critic are bound to different problems")
    meta = {"format": CHECKPOINT_VERSION, "binding": policy.binding(),
            "shapes": {}, "extra": extra or {}}
    blobs = {}
    for prefix, net in (("policy", policy), ("critic", critic)):
        for name, arr in net.parameters().items():
            key = f"{prefix}/{name}"
            blobs[key] = arr
            meta["shapes"][key] = list(arr.shape)
    blobs["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **blobs)


def _open(path):
    try:
        data = np.load(Path(path))
    except (OSError, ValueError) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise CheckpointError(f"{path}: not a checkpoint ({exc})") from None
    if not hasattr(data, "files") or "__meta__" not in data.files:
        raise CheckpointError(f"{path}: not a checkpoint (no metadata)")
    return data


def _meta(data, path) -> dict:
    try:
        meta = json.loads(bytes(data["__meta__"]).decode())
        meta["binding"]["n"], meta["binding"]["m"], meta["binding"]["variant"]
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint metadata ({exc})") from None
    return meta


def read_checkpoint_meta(path) -> dict:
    with _open(path) as data:
        return _meta(data, path)


def load_checkpoint(path, expect: dict | None = None):
    """Load ``(policy, critic, meta)``; ``expect`` may pin ``n``, ``m``, ``variant``."""
    with _open(path) as data:
        meta = _meta(data, path)
        if meta.get("format") != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint format {meta.get('format')}")
        bind = meta["binding"]
        if bind.get("obs_layout") != OBS_LAYOUT_VERSION:
            raise CheckpointError(
                f"checkpoint uses observation layout {bind['obs_layout']}, "
                f"this build uses {OBS_LAYOUT_VERSION}")
        for key, want in (expect or {}).items():
            got = bind.get(key)
            if isinstance(want, Variant):
                want = want.value
            if got != want:
                raise CheckpointError(f"checkpoint is bound to {key}={got}, expected {want}")
        policy = Policy(bind["variant"], bind["n"], bind["m"], rng=0)
        critic = Critic(bind["variant"], bind["n"], bind["m"], rng=0)
        for prefix, net in (("policy", policy), ("critic", critic)):
            params = net.parameters()
            for name, arr in params.items():
                key = f"{prefix}/{name}"
                if key not in data.files:
                    raise CheckpointError(f"checkpoint lacks parameter '{key}'")
                blob = data[key]
                if blob.shape != arr.shape:
                    raise CheckpointError(f"parameter '{key}' has shape {blob.shape}, expected {arr.shape}")
                arr[...] = blob
    return policy, critic, meta
