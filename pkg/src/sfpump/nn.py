"""Small numpy layers with hand-written reverse-mode gradients.

Each layer caches what it needs on ``forward`` and consumes it on
``backward``; gradients accumulate into ``layer.grads`` (same keys as
``layer.params``).
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class NonFiniteActivation(FloatingPointError):
    pass


class BackwardWithoutForward(RuntimeError):
    pass


class ShapeMismatch(ValueError):
    pass


def orthogonal(rng, shape, gain=1.0):
    """Orthogonal init for a 2-D ``(fan_in, fan_out)`` weight."""
    rows, cols = shape
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(gain * q[:rows, :cols])


class Layer:
    params: dict[str, np.ndarray]

    def __init__(self):
        self.params = {}
        self.grads = {}
        self._cache = None

    def zero_grad(self):
        for k, v in self.params.items():
            self.grads[k] = np.zeros_like(v)

    def _take_cache(self):
        if self._cache is None:
            raise BackwardWithoutForward(f"{type(self).__name__}.backward called before forward")
        cache, self._cache = self._cache, None
        return cache


class Dense(Layer):
    def __init__(self, n_in, n_out, rng, gain=np.sqrt(2.0)):
        super().__init__()
        self.params = {"W": orthogonal(rng, (n_in, n_out), gain), "b": np.zeros(n_out)}
        self.zero_grad()

    def forward(self, x):
        if x.shape[-1] != self.params["W"].shape[0]:
            raise ShapeMismatch(f"Dense expects width {self.params['W'].shape[0]}, got {x.shape[-1]}")
        self._cache = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, g):
        x = self._take_cache()
        self.grads["W"] += x.T @ g
        self.grads["b"] += g.sum(axis=0)
        return g @ self.params["W"].T


class Tanh(Layer):
    def forward(self, x):
        y = np.tanh(x)
        self._cache = y
        return y

    def backward(self, g):
        y = self._take_cache()
        return g * (1.0 - y * y)


class ReLU(Layer):
    def forward(self, x):
        mask = x > 0
        self._cache = mask
        return x * mask

    def backward(self, g):
        return g * self._take_cache()


class Conv2d(Layer):
    """3x3 (or ``k``x``k``) stride-1 convolution with zero padding.

    Input ``(B, C_in, H, W)``, output ``(B, C_out, H, W)`` when
    ``pad = (k - 1) / 2``.
    """

    def __init__(self, c_in, c_out, rng, k=3, pad=1):
        super().__init__()
        fan_in = c_in * k * k
        W = orthogonal(rng, (fan_in, c_out), np.sqrt(2.0)).T.reshape(c_out, c_in, k, k)
        self.params = {"W": W, "b": np.zeros(c_out)}
        self.k, self.pad = k, pad
        self.zero_grad()

    def forward(self, x):
        c_out, c_in, k, _ = self.params["W"].shape
        if x.ndim != 4 or x.shape[1] != c_in:
            raise ShapeMismatch(f"Conv2d expects (B, {c_in}, H, W), got {x.shape}")
        p = self.pad
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        # (B, C_in, H_out, W_out, k, k)
        cols = sliding_window_view(xp, (k, k), axis=(2, 3))
        self._cache = (x.shape, cols)
        out = np.tensordot(cols, self.params["W"], axes=([1, 4, 5], [1, 2, 3]))
        return out.transpose(0, 3, 1, 2) + self.params["b"][None, :, None, None]

    def backward(self, g):
        x_shape, cols = self._take_cache()
        W = self.params["W"]
        k, p = self.k, self.pad
        self.grads["W"] += np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))
        self.grads["b"] += g.sum(axis=(0, 2, 3))
        B, C, H, Wd = x_shape
        H_out, W_out = g.shape[2], g.shape[3]
        dxp = np.zeros((B, C, H + 2 * p, Wd + 2 * p))
        for i in range(k):
            for j in range(k):
                dxp[:, :, i:i + H_out, j:j + W_out] += np.tensordot(
                    g, W[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
        return dxp[:, :, p:p + H, p:p + Wd]


class Sequential:
    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        if not np.all(np.isfinite(x)):
            raise NonFiniteActivation("non-finite activation in forward pass")
        return x

    def backward(self, g):
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def named_layers(self):
        return [(str(i), layer) for i, layer in enumerate(self.layers) if layer.params]
