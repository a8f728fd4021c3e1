"""Training objectives: biased ERM, IPS, multi-task, and the adversarial
self-training objective with its four parts.

Label-level helpers work on logit arrays and return ``(value, d_logit)``
where ``d_logit`` is already divided by the batch size, so summing
per-example contributions in ``models.backward`` gives the batch gradient.
Model-level losses run the forward pass themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import models
from .data import LOGGED, Interactions
from .errors import ConfigurationError, ContractError, NumericalError
from .models import PHI, PSI, THETA, Model, Trace
from .numcore import Rng, sigmoid, sigmoid_raw

EXP_CLAMP = 30.0


@dataclass
class LossWeights:
    alpha: float = 0.6
    beta: float = 0.4
    gamma: float = 0.4
    rho: float = 0.8
    ips_clip: float = 0.05

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ConfigurationError("alpha, beta and gamma must be nonnegative")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigurationError(f"rho must lie in [0, 1], got {self.rho}")
        if not 0.0 < self.ips_clip <= 1.0:
            raise ConfigurationError(f"ips_clip must lie in (0, 1], got {self.ips_clip}")


@dataclass
class PropensityTable:
    values: np.ndarray
    tau: float = 1.0
    floor: float = 0.05

    def weights(self, items, users=None) -> np.ndarray:
        """Inverse propensities; a 2-D table holds one value per (user, item)."""
        if self.values.ndim == 2:
            return 1.0 / self.values[users, items]
        return 1.0 / self.values[items]


def log_loss(label, logit):
    """-y log s - (1 - y) log(1 - s) with s the clamped sigmoid."""
    s = sigmoid(logit)
    label = np.asarray(label, dtype=np.float64)
    out = -label * np.log(s) - (1.0 - label) * np.log1p(-s)
    return out if np.ndim(out) else float(out)


def binary_entropy(logit):
    """H(sigmoid(y)) in the stable form log1p(e^-a) + a sigmoid(-a), a = |y|."""
    a = np.abs(np.asarray(logit, dtype=np.float64))
    e = np.exp(-a)
    out = np.log1p(e) + a * e / (1.0 + e)
    return out if np.ndim(out) else float(out)


def _check_batch(n, what="batch"):
    if n == 0:
        raise ContractError(f"empty {what}")


def erm_partials(logits, labels, weights=None, normalizer=None):
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    _check_batch(logits.size)
    n = logits.size if normalizer is None else normalizer
    losses = log_loss(labels, logits)
    residual = sigmoid_raw(logits) - labels
    if weights is None:
        return float(np.sum(losses) / n), residual / n
    return float(np.sum(weights * losses) / n), weights * residual / n


def entropy_partials(logits):
    logits = np.asarray(logits, dtype=np.float64)
    _check_batch(logits.size)
    n = logits.size
    p = sigmoid_raw(logits)
    return float(np.sum(binary_entropy(logits)) / n), -logits * p * (1.0 - p) / n


def adversarial_partials(score_p, score_q):
    """Dual KL value mean_P[s] - mean_Q[exp s] + 1 and its score partials."""
    score_p = np.asarray(score_p, dtype=np.float64)
    score_q = np.asarray(score_q, dtype=np.float64)
    _check_batch(score_p.size, "P batch")
    _check_batch(score_q.size, "Q batch")
    if not (np.all(np.isfinite(score_p)) and np.all(np.isfinite(score_q))):
        raise NumericalError("non-finite critic score")
    clipped = np.minimum(score_q, EXP_CLAMP)
    e = np.exp(clipped)
    value = float(np.mean(score_p) - np.mean(e) + 1.0)
    d_q = np.where(score_q < EXP_CLAMP, -e, 0.0) / score_q.size
    d_p = np.full(score_p.size, 1.0 / score_p.size)
    return value, d_p, d_q


def loss_biased_erm(model: Model, batch: Interactions, rng: Rng | None = None,
                    train: bool = True):
    """Mean log loss. Returns ``(value, d_logit, trace)``."""
    _check_batch(len(batch))
    trace = models.forward(model, batch.users, batch.items, train, rng)
    value, d_logit = erm_partials(trace.logit, batch.labels)
    return value, d_logit, trace


def estimate_propensity(biased_train: Interactions, n_users: int, n_items: int,
                        tau: float = 1.0, floor: float = 0.05) -> PropensityTable:
    """Item-popularity propensities clip((count_i / n_users) ** tau, floor, 1)."""
    counts = np.bincount(biased_train.items, minlength=n_items).astype(np.float64)
    values = np.clip((counts / max(n_users, 1)) ** tau, floor, 1.0)
    return PropensityTable(values, tau, floor)


def ips_weights(batch: Interactions, propensities: PropensityTable) -> np.ndarray:
    """1/p for logged records; uniform-sourced records keep weight 1."""
    w = propensities.weights(batch.items, batch.users)
    return np.where(batch.sources == LOGGED, w, 1.0)


def loss_ips(model: Model, batch: Interactions, propensities: PropensityTable,
             rng: Rng | None = None, train: bool = True, normalizer: float | None = None):
    """Inverse-propensity weighted log loss, ``(value, d_logit, trace)``.

    ``normalizer`` defaults to the batch size; pass the number of
    (user, item) cells for the population-normalised estimator.
    """
    _check_batch(len(batch))
    trace = models.forward(model, batch.users, batch.items, train, rng)
    value, d_logit = erm_partials(trace.logit, batch.labels, ips_weights(batch, propensities),
                                  normalizer)
    return value, d_logit, trace


def loss_adversarial(model: Model, trace_p: Trace, trace_q: Trace):
    """Critic estimate of KL(P(z) || Q(z)) on two feature batches.

    Returns ``(value, grads)`` where ``grads`` are gradients of ``value``
    itself: the trainer descends on phi and ascends on theta. The head gets
    nothing from this term.
    """
    cp = models.critic_forward(model, trace_p.z)
    cq = models.critic_forward(model, trace_q.z)
    value, d_p, d_q = adversarial_partials(cp.score, cq.score)
    grads = model.zero_grads()
    models.backward(model, trace_p, critic=cp, d_score=d_p, freeze={PSI}, grads=grads)
    models.backward(model, trace_q, critic=cq, d_score=d_q, freeze={PSI}, grads=grads)
    return value, grads


def pseudo_label(teacher: Model, users, items) -> np.ndarray:
    """Soft targets sigmoid(teacher eval logit); the teacher is never updated."""
    return sigmoid_raw(models.predict(teacher, users, items))


def loss_self_train(model: Model, trace_q: Trace, pseudo_labels):
    """Log loss of student logits against soft pseudo-labels.

    Returns ``(value, d_logit)``; backpropagate with ``freeze={psi, theta}``.
    """
    pseudo_labels = np.asarray(pseudo_labels, dtype=np.float64)
    if pseudo_labels.shape != trace_q.logit.shape:
        raise ContractError(f"{pseudo_labels.size} pseudo-labels for {trace_q.logit.size} pairs")
    return erm_partials(trace_q.logit, pseudo_labels)


def loss_entropy(model: Model, trace_q: Trace):
    """Mean binary entropy of the student's predictions, ``(value, d_logit)``."""
    return entropy_partials(trace_q.logit)


@dataclass
class TotalLoss:
    value: float
    components: dict
    grads: dict
    trace_d: Trace | None = None
    trace_q: Trace | None = None
    extras: dict = field(default_factory=dict)


def loss_total(model: Model, teacher: Model | None, batch_d: Interactions, q_users, q_items,
               weights: LossWeights, rng_d: Rng | None = None, rng_q: Rng | None = None,
               entropy_updates_head: bool = False) -> TotalLoss:
    """L_D + alpha L_A + beta L_S + gamma L_E with its gradient routing.

    The returned ``grads`` are a descent direction for every parameter:
    phi and psi hold plain gradients, theta holds the *negated* gradient of
    alpha * L_A so a descent step on it is the critic's ascent step.
    Components with zero weight are skipped entirely, so with
    alpha = beta = gamma = 0 the computation is exactly biased ERM.
    """
    if len(batch_d) == 0:
        raise ContractError("empty batch_D")
    q_users = np.asarray(q_users, dtype=np.int64)
    q_items = np.asarray(q_items, dtype=np.int64)
    a, b, g = weights.alpha, weights.beta, weights.gamma
    if (a > 0 or b > 0 or g > 0) and q_users.size == 0:
        raise ConfigurationError("alpha, beta or gamma > 0 needs a non-empty uniform batch")
    if b > 0 and teacher is None:
        raise ConfigurationError("self-training needs a teacher snapshot")

    trace_d = models.forward(model, batch_d.users, batch_d.items, True, rng_d)
    loss_d, d_logit_d = erm_partials(trace_d.logit, batch_d.labels)
    grads = models.backward(model, trace_d, d_logit=d_logit_d)
    components = {"D": loss_d, "A": 0.0, "S": 0.0, "E": 0.0}
    total = loss_d
    if not (a > 0 or b > 0 or g > 0):
        return TotalLoss(total, components, grads, trace_d)

    trace_q = models.forward(model, q_users, q_items, True, rng_q)
    theta_grads = {n: np.zeros_like(model.params[n]) for n in model.names(THETA)}
    phi_only = frozenset({PSI, THETA})
    d_logit_q_phi = np.zeros_like(trace_q.logit)
    d_z_q = None

    if a > 0:
        logged = np.flatnonzero(batch_d.sources == LOGGED)
        if logged.size:
            cp = models.critic_forward(model, trace_d.z[logged])
            cq = models.critic_forward(model, trace_q.z)
            loss_a, d_p, d_q = adversarial_partials(cp.score, cq.score)
            dz_p = models.critic_backward(model, cp, a * d_p, theta_grads)
            d_z_q = models.critic_backward(model, cq, a * d_q, theta_grads)
            d_z_d = np.zeros_like(trace_d.z)
            d_z_d[logged] = dz_p
            models.backward(model, trace_d, d_z=d_z_d, freeze=phi_only, grads=grads)
            components["A"] = loss_a
            total += a * loss_a

    if b > 0:
        pseudo = pseudo_label(teacher, q_users, q_items)
        loss_s, d_s = loss_self_train(model, trace_q, pseudo)
        d_logit_q_phi += b * d_s
        components["S"] = loss_s
        total += b * loss_s

    d_logit_q_head = None
    if g > 0:
        loss_e, d_e = loss_entropy(model, trace_q)
        if entropy_updates_head:
            d_logit_q_head = g * d_e
        else:
            d_logit_q_phi += g * d_e
        components["E"] = loss_e
        total += g * loss_e

    models.backward(model, trace_q, d_logit=d_logit_q_phi, d_z=d_z_q, freeze=phi_only,
                    grads=grads)
    if d_logit_q_head is not None:
        models.backward(model, trace_q, d_logit=d_logit_q_head, freeze={THETA}, grads=grads)
    for name, gr in theta_grads.items():
        grads[name] = grads[name] - gr
    return TotalLoss(total, components, grads, trace_d, trace_q)


def loss_multitask(model: Model, batch_p: Interactions, batch_q: Interactions,
                   weights: LossWeights, rng: Rng | None = None, train: bool = True):
    """rho L_P + (1 - rho) L_Q + alpha ||mean z_P - mean z_Q||^2.

    Returns ``(value, grads)``.
    """
    rho, a = weights.rho, weights.alpha
    need_q = rho < 1.0 or a > 0
    if need_q and len(batch_q) == 0:
        raise ConfigurationError("multi-task objective with rho < 1 or alpha > 0 needs "
                                 "labeled uniform data")
    _check_batch(len(batch_p), "P batch")
    trace_p = models.forward(model, batch_p.users, batch_p.items, train, rng)
    loss_p, d_p = erm_partials(trace_p.logit, batch_p.labels)
    grads = models.backward(model, trace_p, d_logit=rho * d_p)
    value = rho * loss_p
    if not need_q:
        return value, grads
    trace_q = models.forward(model, batch_q.users, batch_q.items, train, rng)
    d_q = None
    if rho < 1.0:
        loss_q, d_q = erm_partials(trace_q.logit, batch_q.labels)
        d_q = (1.0 - rho) * d_q
        value += (1.0 - rho) * loss_q
    d_z_q = None
    if a > 0:
        diff = trace_p.z.mean(axis=0) - trace_q.z.mean(axis=0)
        value += a * float(diff @ diff)
        d_z_p = np.broadcast_to(2.0 * a * diff / trace_p.z.shape[0], trace_p.z.shape)
        d_z_q = np.broadcast_to(-2.0 * a * diff / trace_q.z.shape[0], trace_q.z.shape)
        models.backward(model, trace_p, d_z=d_z_p, freeze={PSI, THETA}, grads=grads)
    models.backward(model, trace_q, d_logit=d_q, d_z=d_z_q, freeze={THETA}, grads=grads)
    return value, grads


def alignment_distance(z_p, z_q) -> float:
    diff = np.mean(z_p, axis=0) - np.mean(z_q, axis=0)
    return float(diff @ diff)
