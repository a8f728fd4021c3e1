"""Deterministic numerical substrate.

Random numbers come from a counter-based splitmix64 generator so that a
``(seed, stream_id)`` pair yields the same bits everywhere, including when
thousands of deviates are drawn in one vectorised call. Normal deviates use
the cosine branch of Box-Muller, one normal per two uniforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError

GAUSSIAN_TRANSFORM = "box-muller-cos"
PROB_EPS = 1e-7

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO_PI = 2.0 * np.pi


def _mix64(x):
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64)
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


class Rng:
    """Splitmix64 stream.

    ``state`` is the Weyl counter; each draw adds the golden-ratio increment
    and returns the mixed counter. Streams sharing a seed start at
    well-separated counter values derived from the stream id.
    """

    def __init__(self, seed: int = 0, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        offset = int(_mix64(np.uint64((self.stream_id * 0x9E3779B97F4A7C15 + 1) & _MASK64)))
        self.state = self.seed ^ offset

    def stream(self, stream_id: int) -> "Rng":
        """Independent sibling stream from the same seed."""
        return Rng(self.seed, stream_id)

    def spawn(self) -> "Rng":
        """Child generator seeded from this stream's next output."""
        return Rng(int(self.next_u64(1)[0]), self.stream_id)

    def copy(self) -> "Rng":
        out = Rng.__new__(Rng)
        out.seed, out.stream_id, out.state = self.seed, self.stream_id, self.state
        return out

    def next_u64(self, n: int) -> np.ndarray:
        with np.errstate(over="ignore"):
            steps = np.arange(1, n + 1, dtype=np.uint64) * _GOLDEN
            counters = np.uint64(self.state) + steps
        self.state = (self.state + n * int(_GOLDEN)) & _MASK64
        return _mix64(counters)

    def uniform(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        if size is None:
            return float(u[0])
        return u.reshape(size)

    def normal(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        u = self.uniform(2 * n)
        radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        z = radius * np.cos(_TWO_PI * u[1::2])
        if size is None:
            return float(z[0])
        return z.reshape(size)

    def integers(self, high: int, size=None):
        """Uniform integers in ``[0, high)``."""
        u = self.uniform(1 if size is None else size)
        out = np.minimum(np.floor(np.asarray(u) * high).astype(np.int64), high - 1)
        if size is None:
            return int(out.reshape(-1)[0])
        return out

    def permutation(self, n: int) -> np.ndarray:
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        return np.argsort(self.uniform(n), kind="stable")

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream_id={self.stream_id}, state={self.state:#x})"


def rng_uniform(rng: Rng) -> float:
    return rng.uniform()


def rng_gaussian(rng: Rng) -> float:
    return rng.normal()


def sigmoid_raw(y):
    """Numerically stable logistic function without clamping."""
    y = np.asarray(y, dtype=np.float64)
    e = np.exp(-np.abs(y))
    out = np.where(y >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def sigmoid(y):
    """Logistic function clamped to ``[PROB_EPS, 1 - PROB_EPS]``."""
    out = np.clip(sigmoid_raw(y), PROB_EPS, 1.0 - PROB_EPS)
    return out if np.ndim(out) else float(out)


def log_sigmoid(y):
    y = np.asarray(y, dtype=np.float64)
    out = -np.logaddexp(0.0, -y)
    return out if out.ndim else float(out)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        params = np.asarray(params, dtype=np.float64)
        return cls(np.zeros_like(params), np.zeros_like(params), 0)


def adam_step(params, grads, state: AdamState, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0):
    """One bias-corrected Adam update with decoupled weight decay.

    Returns ``(new_params, new_state)``; inputs are not modified.
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ConfigurationError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}")
    if not lr > 0:
        raise ConfigurationError(f"learning rate must be positive, got {lr}")
    if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
        raise ConfigurationError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grads
    v = beta2 * state.v + (1.0 - beta2) * grads * grads
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    new = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    if weight_decay:
        new = new - lr * weight_decay * params
    return new, AdamState(m, v, t)


def sgd_step(params, grads, lr: float, weight_decay: float = 0.0):
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise ConfigurationError(f"shape mismatch: params {params.shape}, grads {grads.shape}")
    new = params - lr * grads
    if weight_decay:
        new = new - lr * weight_decay * params
    return new


def finite_diff_grad(loss, params, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar ``loss`` at ``params``."""
    p = np.array(params, dtype=np.float64, copy=True)
    flat = p.reshape(-1)
    grad = np.zeros(flat.shape, dtype=np.float64)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + h
        up = float(loss(p))
        flat[j] = orig - h
        down = float(loss(p))
        flat[j] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericalError(f"non-finite loss when perturbing coordinate {j}", index=j)
        grad[j] = (up - down) / (2.0 * h)
    return grad.reshape(p.shape)


@dataclass
class Optimizer:
    """Adam (or plain SGD) over a named parameter dictionary."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    kind: str = "adam"
    states: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict, names=None):
        for name in names if names is not None else list(grads):
            g = grads[name]
            if self.kind == "sgd":
                params[name] = sgd_step(params[name], g, self.lr, self.weight_decay)
                continue
            state = self.states.get(name)
            if state is None:
                state = AdamState.zeros_like(params[name])
            params[name], self.states[name] = adam_step(
                params[name], g, state, self.lr, self.beta1, self.beta2, self.eps,
                self.weight_decay)
