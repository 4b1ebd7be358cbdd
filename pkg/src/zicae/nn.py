"""Minimal dense-network engine with analytic backpropagation.

Everything runs on float64 numpy arrays shaped (batch, features).  Layers
cache whatever their backward pass needs during forward; each layer instance
therefore appears exactly once in a computation graph.  Gradients are summed
over the batch (losses carry their own 1/batch factor).

Besides the usual dense/residual blocks this module provides the two
power-related normalizations of the transmitter: a multiplicative-only batch
power normalization (per-column unit mean square, no centering) and a
row-wise power normalization that rescales vectors to a fixed total power.
"""

from __future__ import annotations

import numpy as np

TANH = "tanh"
SIGMOID = "sigmoid"
LINEAR = "none"

_EPS_NORM = 1e-12  # floor inside both normalization denominators


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == TANH:
        return np.tanh(z)
    if kind == SIGMOID:
        return 1.0 / (1.0 + np.exp(-z))
    if kind == LINEAR:
        return z
    raise ValueError(f"unknown activation {kind!r}")


def _activation_grad(y: np.ndarray, kind: str) -> np.ndarray:
    """Derivative expressed through the cached activation output y."""
    if kind == TANH:
        return 1.0 - y * y
    if kind == SIGMOID:
        return y * (1.0 - y)
    if kind == LINEAR:
        return np.ones_like(y)
    raise ValueError(f"unknown activation {kind!r}")


class Dense:
    """Fully connected layer y = act(x @ W.T + b) with gradient buffers."""

    def __init__(self, n_in: int, n_out: int, activation: str = TANH,
                 rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng()
        limit = np.sqrt(6.0 / (n_in + n_out))
        self.W = rng.uniform(-limit, limit, size=(n_out, n_in))
        self.b = np.zeros(n_out)
        self.activation = activation
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self._x = None
        self._y = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.W.shape[1]:
            raise ValueError(f"expected {self.W.shape[1]} input columns, got {x.shape[1]}")
        self._x = x
        self._y = _activate(x @ self.W.T + self.b, self.activation)
        return self._y

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        gz = grad_out * _activation_grad(self._y, self.activation)
        self.dW = gz.T @ self._x
        self.db = gz.sum(axis=0)
        return gz @ self.W

    def params(self) -> list[np.ndarray]:
        return [self.W, self.b]

    def grads(self) -> list[np.ndarray]:
        return [self.dW, self.db]


class Residual:
    """Shortcut y = x + f(x) around an inner layer; gradient flows to both."""

    def __init__(self, inner: Dense):
        self.inner = inner

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x + self.inner.forward(x)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out + self.inner.backward(grad_out)

    def params(self) -> list[np.ndarray]:
        return self.inner.params()

    def grads(self) -> list[np.ndarray]:
        return self.inner.grads()


class BatchPowerNorm:
    """Scale each column to unit mean square; multiplicative only.

    Training mode uses the batch statistic and updates an exponential running
    mean square; inference mode uses the frozen running value.  There is no
    mean subtraction and no learned affine term.
    """

    def __init__(self, n_cols: int = 2, momentum: float = 0.99):
        if not 0.0 < momentum < 1.0:
            raise ValueError(f"momentum must be in (0,1), got {momentum}")
        self.momentum = momentum
        self.running_ms = np.ones(n_cols)
        self._x = None
        self._ms = None
        self._floored = None
        self._beta = None

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        if training:
            ms = np.mean(x * x, axis=0)
            self.running_ms = self.momentum * self.running_ms + (1.0 - self.momentum) * ms
            self._floored = ms < _EPS_NORM
            self._ms = np.maximum(ms, _EPS_NORM)
            self._x = x
            self._beta = 1.0 / np.sqrt(self._ms)
        else:
            self._x = None
            self._beta = 1.0 / np.sqrt(np.maximum(self.running_ms, _EPS_NORM))
        return x * self._beta

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._x is None:  # inference: beta is a constant
            return grad_out * self._beta
        n = self._x.shape[0]
        corr = self._x * (np.sum(grad_out * self._x, axis=0) / (n * self._ms**1.5))
        dx = grad_out * self._beta - np.where(self._floored, 0.0, corr)
        return dx

    def params(self) -> list[np.ndarray]:
        return []

    def grads(self) -> list[np.ndarray]:
        return []


class PowerNorm:
    """Rescale each row to squared norm ``total_power`` (gamma.T @ gamma = P_t)."""

    def __init__(self, total_power: float):
        if total_power <= 0:
            raise ValueError(f"total_power must be > 0, got {total_power}")
        self.total_power = total_power
        self._x = None
        self._r = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        r = np.sqrt(np.sum(x * x, axis=1, keepdims=True))
        self._x = x
        self._r = np.maximum(r, _EPS_NORM)
        return np.sqrt(self.total_power) * x / self._r

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        dot = np.sum(grad_out * self._x, axis=1, keepdims=True)
        floored = self._r <= _EPS_NORM
        corr = np.where(floored, 0.0, self._x * dot / self._r**3)
        return np.sqrt(self.total_power) * (grad_out / self._r - corr)

    def params(self) -> list[np.ndarray]:
        return []

    def grads(self) -> list[np.ndarray]:
        return []


def gaussian_noise(x: np.ndarray, var_per_component: float,
                   rng: np.random.Generator | None) -> np.ndarray:
    """Additive iid zero-mean Gaussian noise; identity in the backward pass."""
    if var_per_component < 0:
        raise ValueError(f"variance must be >= 0, got {var_per_component}")
    if rng is None or var_per_component == 0.0:
        return x
    return x + np.sqrt(var_per_component) * rng.standard_normal(x.shape)


_BCE_CLIP = 1e-7


def bce_loss(s: np.ndarray, s_hat: np.ndarray) -> float:
    """Mean-over-batch binary cross entropy, summed over bit positions."""
    p = np.clip(s_hat, _BCE_CLIP, 1.0 - _BCE_CLIP)
    n = s.shape[0]
    return float(-(s * np.log(p) + (1.0 - s) * np.log(1.0 - p)).sum() / n)


def bce_loss_grad(s: np.ndarray, s_hat: np.ndarray) -> np.ndarray:
    """Gradient of :func:`bce_loss` with respect to the predictions."""
    p = np.clip(s_hat, _BCE_CLIP, 1.0 - _BCE_CLIP)
    n = s.shape[0]
    return -(s / p - (1.0 - s) / (1.0 - p)) / n


class Adam:
    """Adaptive-moment optimizer over a fixed list of parameter arrays.

    Parameters are updated in place so layer references stay valid.  The
    learning rate decays multiplicatively via :meth:`decay_lr`.
    """

    def __init__(self, params: list[np.ndarray], lr: float = 1e-2,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 decay: float = 0.95):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.decay = decay
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameter list")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def decay_lr(self) -> None:
        self.lr *= self.decay
