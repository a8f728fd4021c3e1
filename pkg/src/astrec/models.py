"""Feature map (phi), prediction head (psi) and critic (theta).

phi(u, i) is either the elementwise product of the two embeddings (MF) or a
two-layer tanh MLP over their concatenation (NCF); both give a k-dimensional
z. The head is linear, ``logit = w . dropout(z) + b``. The critic is a
k -> width -> 1 tanh perceptron on the (pre-dropout) z.

All passes are batched: ``forward`` takes id arrays and returns a ``Trace``
holding what ``backward`` needs.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractError, ParseError
from .numcore import GAUSSIAN_TRANSFORM, Rng

MF = "MF"
NCF = "NCF"
PHI = "phi"
PSI = "psi"
THETA = "theta"
ALL_GROUPS = frozenset({PHI, PSI, THETA})
EMBED_STD = 0.01
CHECKPOINT_MAGIC = "ASTCKPT v1"


@dataclass
class Model:
    variant: str
    n_users: int
    n_items: int
    k: int
    dropout_rate: float
    critic_width: int
    params: dict
    seed: int = 0
    version: int = 0
    meta: dict = field(default_factory=dict)

    def group_of(self, name: str) -> str:
        if name.startswith("critic_"):
            return THETA
        if name.startswith("head_"):
            return PSI
        return PHI

    def names(self, *groups) -> list:
        return [n for n in self.params if self.group_of(n) in groups]

    def snapshot(self) -> "Model":
        """Frozen deep copy (used as the self-training teacher)."""
        return copy.deepcopy(self)

    def touch(self):
        """Mark parameters as changed; traces taken earlier become stale."""
        self.version += 1

    def zero_grads(self) -> dict:
        return {n: np.zeros_like(p) for n, p in self.params.items()}


def _glorot(rng: Rng, fan_out: int, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return (2.0 * rng.uniform((fan_out, fan_in)) - 1.0) * bound


def init(variant: str, n_users: int, n_items: int, k: int, dropout_rate: float = 0.0,
         rng: Rng | None = None, critic_width: int = 16, seed: int = 0) -> Model:
    if variant not in (MF, NCF):
        raise ConfigurationError(f"unknown variant {variant!r}")
    if k <= 0 or critic_width <= 0:
        raise ConfigurationError("embedding dimension and critic width must be positive")
    if not 0.0 <= dropout_rate < 1.0:
        raise ConfigurationError(f"dropout rate must lie in [0, 1), got {dropout_rate}")
    rng = rng if rng is not None else Rng(seed, 0)
    params = {
        "user_emb": rng.normal((n_users, k)) * EMBED_STD,
        "item_emb": rng.normal((n_items, k)) * EMBED_STD,
    }
    if variant == NCF:
        params["mlp_W1"] = _glorot(rng, k, 2 * k)
        params["mlp_b1"] = np.zeros(k)
        params["mlp_W2"] = _glorot(rng, k, k)
        params["mlp_b2"] = np.zeros(k)
    # all-ones head: MF starts as the plain dot-product model
    params["head_w"] = np.ones(k)
    params["head_b"] = np.zeros(1)
    params["critic_W1"] = _glorot(rng, critic_width, k)
    params["critic_b1"] = np.zeros(critic_width)
    params["critic_w2"] = _glorot(rng, 1, critic_width).reshape(-1)
    params["critic_b2"] = np.zeros(1)
    return Model(variant, n_users, n_items, k, float(dropout_rate), critic_width, params, seed)


@dataclass
class Trace:
    users: np.ndarray
    items: np.ndarray
    version: int
    ue: np.ndarray
    ie: np.ndarray
    z: np.ndarray
    z_drop: np.ndarray
    logit: np.ndarray
    mask_z: np.ndarray | None = None
    h0: np.ndarray | None = None
    a1: np.ndarray | None = None
    a1_drop: np.ndarray | None = None
    mask1: np.ndarray | None = None


@dataclass
class CriticTrace:
    z: np.ndarray
    hidden: np.ndarray
    score: np.ndarray
    version: int = 0


def _scatter_rows(target, rows, values):
    """target[rows] += values with repeated rows accumulated (fast np.add.at)."""
    n, k = target.shape
    flat = (rows[:, None] * k + np.arange(k)).ravel()
    target += np.bincount(flat, weights=values.ravel(), minlength=n * k).reshape(n, k)


def _dropout_mask(rng: Rng, shape, rate: float) -> np.ndarray:
    return (rng.uniform(shape) >= rate).astype(np.float64) / (1.0 - rate)


def forward(model: Model, users, items, train: bool = False, rng: Rng | None = None) -> Trace:
    """Compute z = phi(u, i) and logit = psi(z).

    Train mode applies inverted dropout (hidden MLP layer, then z) and needs
    ``rng``; eval mode is deterministic and draws nothing.
    """
    users = np.atleast_1d(np.asarray(users, dtype=np.int64))
    items = np.atleast_1d(np.asarray(items, dtype=np.int64))
    p = model.params
    rate = model.dropout_rate if train else 0.0
    if rate > 0 and rng is None:
        raise ContractError("train-mode forward with dropout needs an rng")
    ue = p["user_emb"][users]
    ie = p["item_emb"][items]
    extra = {}
    if model.variant == MF:
        z = ue * ie
    else:
        h0 = np.concatenate([ue, ie], axis=1)
        a1 = np.tanh(h0 @ p["mlp_W1"].T + p["mlp_b1"])
        mask1 = _dropout_mask(rng, a1.shape, rate) if rate > 0 else None
        a1_drop = a1 * mask1 if mask1 is not None else a1
        z = np.tanh(a1_drop @ p["mlp_W2"].T + p["mlp_b2"])
        extra = dict(h0=h0, a1=a1, a1_drop=a1_drop, mask1=mask1)
    mask_z = _dropout_mask(rng, z.shape, rate) if rate > 0 else None
    z_drop = z * mask_z if mask_z is not None else z
    logit = z_drop @ p["head_w"] + p["head_b"][0]
    return Trace(users, items, model.version, ue, ie, z, z_drop, logit, mask_z, **extra)


def predict(model: Model, users, items) -> np.ndarray:
    """Eval-mode logits."""
    return forward(model, users, items).logit


def critic_forward(model: Model, z) -> CriticTrace:
    p = model.params
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    hidden = np.tanh(z @ p["critic_W1"].T + p["critic_b1"])
    score = hidden @ p["critic_w2"] + p["critic_b2"][0]
    return CriticTrace(z, hidden, score, model.version)


def critic_backward(model: Model, ctrace: CriticTrace, d_score, grads: dict,
                    update_critic: bool = True) -> np.ndarray:
    """Accumulate critic gradients; return d(score)/dz contracted with d_score."""
    p = model.params
    d_pre = (np.asarray(d_score)[:, None] * p["critic_w2"][None, :]) * (1.0 - ctrace.hidden ** 2)
    if update_critic:
        grads["critic_w2"] += ctrace.hidden.T @ d_score
        grads["critic_b2"][0] += np.sum(d_score)
        grads["critic_W1"] += d_pre.T @ ctrace.z
        grads["critic_b1"] += d_pre.sum(axis=0)
    return d_pre @ p["critic_W1"]


def backward(model: Model, trace: Trace, d_logit=None, d_z=None, freeze=(), grads=None,
             critic: CriticTrace | None = None, d_score=None) -> dict:
    """Accumulate exact gradients into ``grads`` (allocated if None).

    ``d_logit``, ``d_z`` and ``d_score`` are per-example partials of the loss
    with respect to the logit, the pre-dropout features and the critic score
    (``critic`` must be the critic pass over ``trace.z``). Groups named in
    ``freeze`` receive no gradient; gradients still flow *through* them.
    """
    if trace.version != model.version:
        raise ContractError("stale trace: model parameters changed since forward")
    if critic is not None and critic.version != model.version:
        raise ContractError("stale critic trace")
    freeze = frozenset(freeze)
    grads = model.zero_grads() if grads is None else grads
    p = model.params
    dz = np.zeros_like(trace.z)
    touched = False
    if critic is not None and d_score is not None:
        dz += critic_backward(model, critic, np.asarray(d_score, dtype=np.float64), grads,
                              THETA not in freeze)
        touched = True
    if d_z is not None:
        dz += d_z
        touched = True
    if d_logit is not None:
        d_logit = np.asarray(d_logit, dtype=np.float64)
        if PSI not in freeze:
            grads["head_w"] += trace.z_drop.T @ d_logit
            grads["head_b"][0] += np.sum(d_logit)
        d_zdrop = d_logit[:, None] * p["head_w"][None, :]
        dz += d_zdrop * trace.mask_z if trace.mask_z is not None else d_zdrop
        touched = True
    if PHI in freeze or not touched:
        return grads
    if model.variant == MF:
        _scatter_rows(grads["user_emb"], trace.users, dz * trace.ie)
        _scatter_rows(grads["item_emb"], trace.items, dz * trace.ue)
        return grads
    d_pre2 = dz * (1.0 - trace.z ** 2)
    grads["mlp_W2"] += d_pre2.T @ trace.a1_drop
    grads["mlp_b2"] += d_pre2.sum(axis=0)
    d_a1 = d_pre2 @ p["mlp_W2"]
    if trace.mask1 is not None:
        d_a1 = d_a1 * trace.mask1
    d_pre1 = d_a1 * (1.0 - trace.a1 ** 2)
    grads["mlp_W1"] += d_pre1.T @ trace.h0
    grads["mlp_b1"] += d_pre1.sum(axis=0)
    d_h0 = d_pre1 @ p["mlp_W1"]
    _scatter_rows(grads["user_emb"], trace.users, d_h0[:, :model.k])
    _scatter_rows(grads["item_emb"], trace.items, d_h0[:, model.k:])
    return grads


def save_checkpoint(model: Model, path, extra: dict | None = None, optimizer_state: bool = False):
    """Text checkpoint: header, key/value lines, then each tensor row-major."""
    lines = [CHECKPOINT_MAGIC,
             f"variant {model.variant}",
             f"n_users {model.n_users}",
             f"n_items {model.n_items}",
             f"k {model.k}",
             f"dropout_rate {model.dropout_rate!r}",
             f"critic_width {model.critic_width}",
             f"seed {model.seed}",
             f"gaussian {GAUSSIAN_TRANSFORM}",
             f"optimizer_state {int(optimizer_state)}"]
    for key, value in (extra or {}).items():
        lines.append(f"meta {key} {value}")
    for name, arr in model.params.items():
        arr = np.asarray(arr, dtype=np.float64)
        rows = arr.reshape(arr.shape[0], -1) if arr.ndim > 1 else arr.reshape(1, -1)
        lines.append(f"param {name} {' '.join(str(d) for d in arr.shape)}")
        lines.extend(" ".join(repr(float(x)) for x in row) for row in rows)
    lines.append("end")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != CHECKPOINT_MAGIC:
        raise ParseError(f"{path}: not an {CHECKPOINT_MAGIC} checkpoint", 1)
    header = {}
    meta = {}
    params = {}
    i = 1
    while i < len(lines):
        line = lines[i]
        if line == "end":
            break
        key, _, rest = line.partition(" ")
        if key == "param":
            name, *dims = rest.split()
            shape = tuple(int(d) for d in dims)
            n_rows = shape[0] if len(shape) > 1 else 1
            try:
                values = [float(x) for row in lines[i + 1:i + 1 + n_rows] for x in row.split()]
                params[name] = np.asarray(values, dtype=np.float64).reshape(shape)
            except ValueError as exc:
                raise ParseError(f"{path}: bad tensor {name}: {exc}", i + 1) from None
            i += 1 + n_rows
            continue
        if key == "meta":
            mk, _, mv = rest.partition(" ")
            meta[mk] = mv
        else:
            header[key] = rest
        i += 1
    model = Model(header["variant"], int(header["n_users"]), int(header["n_items"]),
                  int(header["k"]), float(header["dropout_rate"]), int(header["critic_width"]),
                  params, int(header.get("seed", 0)), meta=meta)
    return model
