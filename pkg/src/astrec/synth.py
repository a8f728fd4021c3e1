"""Semi-synthetic MNAR feedback with a tunable unobserved confounder.

Preference and exposure share a standard-normal confounder ``c``:

    eps_R = lam * c + sqrt(1 - lam**2) * sigma_R * n_R
    eps_O = lam * c + sqrt(1 - lam**2) * sigma_O * n_O
    p(Y=1 | O) = sigmoid(u . v + eps_R)
    p(O)       = min(1, exp(log sigmoid(u' . v' + pop_i + offset) + eps_O))

With ``lam = 0`` the two noises are independent and p(R | O, x) = p(R | x);
larger ``lam`` makes exposed pairs carry upward-shifted labels.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import ndtr

from .data import LOGGED, UNIFORM, Dataset, Interactions, split_uniform, DEFAULT_FRACTIONS
from .errors import ConfigurationError, GenerationError
from .numcore import Rng, log_sigmoid, sigmoid, sigmoid_raw

STREAM_WORLD = 1
STREAM_LOGGED = 2
STREAM_UNIFORM = 3
STREAM_SPLIT = 4
STREAM_ORACLE = 5

CALIBRATION_PAIRS = 10_000
BISECTION_STEPS = 64


@dataclass
class SynthConfig:
    n_users: int = 500
    n_items: int = 300
    k: int = 2
    sigma_factor: float = 2.0
    sigma_R: float = 1.0
    sigma_O: float = 1.0
    lambda_conf: float = 0.6
    target_density: float = 0.05
    uniform_test_pairs: int = 30_000
    popularity_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if min(self.n_users, self.n_items, self.k) <= 0:
            raise ConfigurationError("n_users, n_items and k must be positive")
        if not 0.0 < self.target_density < 1.0:
            raise ConfigurationError(f"target_density must lie in (0, 1), got {self.target_density}")
        if not 0.0 <= self.lambda_conf <= 1.0:
            raise ConfigurationError(f"lambda_conf must lie in [0, 1], got {self.lambda_conf}")
        if min(self.sigma_factor, self.sigma_R, self.sigma_O) < 0:
            raise ConfigurationError("noise and factor scales must be nonnegative")
        if self.uniform_test_pairs < 0:
            raise ConfigurationError("uniform_test_pairs must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SynthWorld:
    user_factors: np.ndarray
    item_factors: np.ndarray
    exposure_user_factors: np.ndarray
    exposure_item_factors: np.ndarray
    item_popularity_bias: np.ndarray
    exposure_scale_offset: float
    config: SynthConfig
    achieved_density: float = float("nan")

    @property
    def lam(self) -> float:
        return self.config.lambda_conf

    @property
    def resid(self) -> float:
        return float(np.sqrt(1.0 - self.config.lambda_conf ** 2))

    def preference_logit(self, users, items):
        return np.einsum("ij,ij->i", self.user_factors[users], self.item_factors[items])

    def exposure_logit(self, users, items):
        s = np.einsum("ij,ij->i", self.exposure_user_factors[users],
                      self.exposure_item_factors[items])
        return s + self.item_popularity_bias[items] + self.exposure_scale_offset


def _exposure_from_logit(logit, eps_o):
    return np.maximum(np.minimum(np.exp(log_sigmoid(logit) + eps_o), 1.0), np.finfo(float).tiny)


def build_world(config: SynthConfig, rng: Rng | None = None) -> SynthWorld:
    config.validate()
    rng = rng if rng is not None else Rng(config.seed, STREAM_WORLD)
    scale = config.sigma_factor / np.sqrt(config.k)
    nu, ni, k = config.n_users, config.n_items, config.k
    user_f = rng.normal((nu, k)) * scale
    item_f = rng.normal((ni, k)) * scale
    exp_user_f = rng.normal((nu, k)) * scale
    exp_item_f = rng.normal((ni, k)) * scale
    pop = rng.normal(ni) * config.popularity_scale
    world = SynthWorld(user_f, item_f, exp_user_f, exp_item_f, pop, 0.0, config)

    users = rng.integers(nu, size=CALIBRATION_PAIRS)
    items = rng.integers(ni, size=CALIBRATION_PAIRS)
    c = rng.normal(CALIBRATION_PAIRS)
    n = rng.normal(CALIBRATION_PAIRS)
    eps_o = world.lam * c + world.resid * config.sigma_O * n
    base = world.exposure_logit(users, items)

    def density(offset):
        return float(np.mean(_exposure_from_logit(base + offset, eps_o)))

    lo, hi = -60.0, 60.0
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if density(mid) < config.target_density:
            lo = mid
        else:
            hi = mid
    offset = 0.5 * (lo + hi)
    achieved = density(offset)
    if abs(achieved / config.target_density - 1.0) > 0.1:
        raise GenerationError(f"exposure calibration failed: achieved density {achieved:.5f}, "
                              f"target {config.target_density}")
    world.exposure_scale_offset = offset
    world.achieved_density = achieved
    return world


def preference_prob(world: SynthWorld, users, items, confounder, noise=0.0):
    """sigmoid(u.v + eps_R) for explicit confounder and noise draws."""
    eps_r = world.lam * np.asarray(confounder) + world.resid * world.config.sigma_R * np.asarray(noise)
    return sigmoid(world.preference_logit(np.atleast_1d(users), np.atleast_1d(items)) + eps_r)


def exposure_prob(world: SynthWorld, users, items, confounder, noise=0.0):
    eps_o = world.lam * np.asarray(confounder) + world.resid * world.config.sigma_O * np.asarray(noise)
    return _exposure_from_logit(world.exposure_logit(np.atleast_1d(users), np.atleast_1d(items)),
                                eps_o)


def all_pairs(n_users: int, n_items: int):
    users = np.repeat(np.arange(n_users, dtype=np.int64), n_items)
    items = np.tile(np.arange(n_items, dtype=np.int64), n_users)
    return users, items


def sample_logged(world: SynthWorld, rng: Rng) -> Interactions:
    """One exposure draw per (user, item) pair; emits exposed pairs only."""
    users, items = all_pairs(world.config.n_users, world.config.n_items)
    n = users.size
    c = rng.normal(n)
    noise_r = rng.normal(n)
    noise_o = rng.normal(n)
    u_exp = rng.uniform(n)
    u_lab = rng.uniform(n)
    exposed = u_exp < exposure_prob(world, users, items, c, noise_o)
    idx = np.flatnonzero(exposed)
    labels = (u_lab[idx] < preference_prob(world, users[idx], items[idx], c[idx],
                                           noise_r[idx])).astype(np.int64)
    return Interactions(users[idx], items[idx], labels, None, LOGGED)


def sample_uniform(world: SynthWorld, n_pairs: int, rng: Rng) -> Interactions:
    """Pairs drawn uniformly with replacement, labelled ignoring exposure."""
    if n_pairs <= 0:
        return Interactions(sources=UNIFORM)
    users = rng.integers(world.config.n_users, size=n_pairs)
    items = rng.integers(world.config.n_items, size=n_pairs)
    c = rng.normal(n_pairs)
    noise_r = rng.normal(n_pairs)
    u_lab = rng.uniform(n_pairs)
    labels = (u_lab < preference_prob(world, users, items, c, noise_r)).astype(np.int64)
    return Interactions(users, items, labels, None, UNIFORM)


def oracle_gk(world: SynthWorld, users, items, mc_draws: int = 100_000, rng: Rng | None = None,
              chunk: int = 8):
    """Monte-Carlo g(x) = p(R|x) and k(x) = p(R|O,x) for each pair.

    Every pair reuses the same draws of (c, n_R, n_O), so g - k differences
    are estimated with common random numbers.
    """
    if mc_draws < 1000:
        raise ConfigurationError("mc_draws must be at least 1000")
    users = np.atleast_1d(np.asarray(users, dtype=np.int64))
    items = np.atleast_1d(np.asarray(items, dtype=np.int64))
    rng = rng if rng is not None else Rng(world.config.seed, STREAM_ORACLE)
    c = rng.normal(mc_draws)
    eps_r = world.lam * c + world.resid * world.config.sigma_R * rng.normal(mc_draws)
    eps_o = world.lam * c + world.resid * world.config.sigma_O * rng.normal(mc_draws)
    pref_logit = world.preference_logit(users, items)
    exp_logit = world.exposure_logit(users, items)
    g = np.empty(users.size)
    k = np.empty(users.size)
    for start in range(0, users.size, chunk):
        sl = slice(start, start + chunk)
        p_pref = sigmoid(pref_logit[sl, None] + eps_r[None, :])
        p_exp = _exposure_from_logit(exp_logit[sl, None], eps_o[None, :])
        g[sl] = p_pref.mean(axis=1)
        k[sl] = (p_pref * p_exp).sum(axis=1) / p_exp.sum(axis=1)
    return g, k


def oracle_g(world, user, item, mc_draws: int = 100_000, rng=None):
    g, _ = oracle_gk(world, user, item, mc_draws, rng)
    return g if np.ndim(user) else float(g[0])


def oracle_k(world, user, item, mc_draws: int = 100_000, rng=None):
    _, k = oracle_gk(world, user, item, mc_draws, rng)
    return k if np.ndim(user) else float(k[0])


def expected_preference(world: SynthWorld, users, items, nodes: int = 80):
    """Closed-form-quality g(x) by Gauss-Hermite quadrature over eps_R."""
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    tau = np.sqrt(world.lam ** 2 + (1.0 - world.lam ** 2) * world.config.sigma_R ** 2)
    s = world.preference_logit(np.atleast_1d(users), np.atleast_1d(items))
    return sigmoid_raw(s[:, None] + tau * x[None, :]) @ w


def expected_exposure(world: SynthWorld, users, items):
    """Exact propensity E[min(1, p_hat * exp(eps_O))] with eps_O ~ N(0, s^2)."""
    s = float(np.sqrt(world.lam ** 2 + (1.0 - world.lam ** 2) * world.config.sigma_O ** 2))
    log_p = log_sigmoid(world.exposure_logit(np.atleast_1d(users), np.atleast_1d(items)))
    p = np.exp(log_p)
    if s == 0.0:
        return p
    t = -log_p / s
    return p * np.exp(0.5 * s * s) * ndtr(t - s) + (1.0 - ndtr(t))


def build_dataset(world: SynthWorld, fractions=DEFAULT_FRACTIONS, seed: int | None = None):
    """Logged pairs -> biased train; uniform pairs -> (train, validation, test).

    Duplicate uniform draws of one (user, item) pair keep their first
    occurrence so the three uniform splits are pair-disjoint.
    """
    seed = world.config.seed if seed is None else seed
    logged = sample_logged(world, Rng(seed, STREAM_LOGGED))
    uniform = sample_uniform(world, world.config.uniform_test_pairs, Rng(seed, STREAM_UNIFORM))
    if len(uniform):
        _, first = np.unique(uniform.pair_keys(world.config.n_items), return_index=True)
        uniform = uniform[np.sort(first)]
    train_q, val, test = split_uniform(uniform, fractions, Rng(seed, STREAM_SPLIT))
    return Dataset(world.config.n_users, world.config.n_items, logged, train_q, val, test)
