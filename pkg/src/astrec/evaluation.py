"""Ranking metrics on uniform test data and distribution-shift diagnostics.

Evaluation ranks each user's own test items (not the full catalogue) by
eval-mode logit, ties broken by ascending item id, and averages per-user
HR@K / NDCG@K over users with at least one positive.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import models
from .data import Interactions
from .errors import ConfigurationError, DiagnosticError, UnsupportedInputError, ValidationError
from .losses import adversarial_partials
from .models import Model
from .numcore import Optimizer, Rng, sigmoid_raw

RECALL = "Recall"
ANY_HIT = "AnyHit"
HR_MODES = (RECALL, ANY_HIT)
DIAG_STREAM = 77


def _discounts(n: int) -> list:
    return [1.0 / math.log2(j + 1) for j in range(1, n + 1)]


def _ideal_dcg(n_relevant: int, k: int) -> float:
    total = 0.0
    for d in _discounts(min(n_relevant, k)):
        total += d
    return total


def ndcg_at_k(ranked_relevance, k: int) -> float:
    """Binary NDCG@K of one ranked list (ideal order from the same list)."""
    if k <= 0:
        raise ConfigurationError(f"K must be positive, got {k}")
    rel = [int(r) for r in ranked_relevance]
    n_rel = sum(rel)
    if n_rel == 0:
        return 0.0
    dcg = 0.0
    for r, d in zip(rel[:k], _discounts(min(k, len(rel)))):
        dcg += r * d
    return dcg / _ideal_dcg(n_rel, k)


def hr_at_k(ranked_relevance, n_relevant_total: int, k: int, mode: str = RECALL) -> float:
    if k <= 0:
        raise ConfigurationError(f"K must be positive, got {k}")
    if n_relevant_total <= 0:
        raise ValidationError("hit ratio undefined for a user without relevant items")
    hits = sum(int(r) for r in list(ranked_relevance)[:k])
    if mode == RECALL:
        return hits / n_relevant_total
    if mode == ANY_HIT:
        return float(hits > 0)
    raise ConfigurationError(f"unknown HR mode {mode!r}")


def rank_items(model: Model, user: int, candidate_items) -> list:
    """Candidates by descending eval logit, ties by ascending item id."""
    cands = np.asarray(list(candidate_items), dtype=np.int64)
    if cands.size == 0:
        return []
    logits = models.predict(model, np.full(cands.size, user), cands)
    return cands[np.lexsort((cands, -logits))].tolist()


@dataclass
class MetricsReport:
    hr_at_k: float
    ndcg_at_k: float
    k: int
    n_users_evaluated: int
    hr_mode: str = RECALL
    hr_recall: float = float("nan")
    hr_anyhit: float = float("nan")
    n_users_skipped: int = 0
    diagnostics: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    per_user: dict = field(default_factory=dict, repr=False)

    def to_row(self) -> dict:
        row = {"K": self.k, "hr_mode": self.hr_mode, f"hr@{self.k}": self.hr_at_k,
               f"ndcg@{self.k}": self.ndcg_at_k, f"hr_recall@{self.k}": self.hr_recall,
               f"hr_anyhit@{self.k}": self.hr_anyhit,
               "n_users_evaluated": self.n_users_evaluated,
               "n_users_skipped": self.n_users_skipped}
        row.update(self.diagnostics)
        row.update(self.metadata)
        return row


def ranking_metrics(users, items, labels, scores, k: int = 5, hr_mode: str = RECALL):
    """Per-user NDCG@K and HR@K for arbitrary scores (vectorised)."""
    if k <= 0:
        raise ConfigurationError(f"K must be positive, got {k}")
    if hr_mode not in HR_MODES:
        raise ConfigurationError(f"unknown HR mode {hr_mode!r}")
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((items, -scores, users))
    u_sorted = users[order]
    rel = labels[order]
    starts = np.flatnonzero(np.r_[True, u_sorted[1:] != u_sorted[:-1]])
    group = np.cumsum(np.r_[True, u_sorted[1:] != u_sorted[:-1]]) - 1
    rank = np.arange(u_sorted.size) - starts[group]
    uniq = u_sorted[starts]
    n_pos = np.bincount(group, weights=rel).astype(np.int64)
    disc = np.asarray(_discounts(k))
    in_top = rank < k
    contrib = np.where(in_top, rel * disc[np.minimum(rank, k - 1)], 0.0)
    dcg = np.bincount(group, weights=contrib, minlength=uniq.size)
    hits = np.bincount(group, weights=(in_top & (rel == 1)).astype(np.float64),
                       minlength=uniq.size)
    idcg_table = np.array([_ideal_dcg(n, k) for n in range(k + 1)])
    keep = n_pos > 0
    idcg = idcg_table[np.minimum(n_pos, k)]
    ndcg = np.where(keep, dcg / np.where(keep, idcg, 1.0), 0.0)
    recall = np.where(keep, hits / np.maximum(n_pos, 1), 0.0)
    anyhit = (hits > 0).astype(np.float64)
    return {"users": uniq[keep], "ndcg": ndcg[keep], "hr_recall": recall[keep],
            "hr_anyhit": anyhit[keep], "n_skipped": int((~keep).sum())}


def evaluate(model: Model, test: Interactions, k: int = 5, hr_mode: str = RECALL) -> MetricsReport:
    if len(test) == 0:
        raise ValidationError("cannot evaluate on an empty test split")
    scores = models.predict(model, test.users, test.items)
    per = ranking_metrics(test.users, test.items, test.labels, scores, k, hr_mode)
    n = per["users"].size
    if n == 0:
        nan = float("nan")
        return MetricsReport(nan, nan, k, 0, hr_mode, nan, nan, per["n_skipped"], per_user=per)
    recall = float(np.mean(per["hr_recall"]))
    anyhit = float(np.mean(per["hr_anyhit"]))
    return MetricsReport(recall if hr_mode == RECALL else anyhit, float(np.mean(per["ndcg"])), k, n,
                         hr_mode, recall, anyhit, per["n_skipped"], per_user=per)


def _logistic_fit(x, y, steps: int, lr: float):
    w = np.zeros(x.shape[1])
    b = 0.0
    n = x.shape[0]
    for _ in range(steps):
        p = sigmoid_raw(x @ w + b)
        r = p - y
        w -= lr * (x.T @ r) / n
        b -= lr * float(np.sum(r)) / n
    return w, b


def a_distance(z_p, z_q, rng: Rng | None = None, steps: int = 200, lr: float = 0.1,
               quadratic: bool = False) -> float:
    """Proxy A-distance 2 (1 - 2 err) of a linear domain classifier.

    Each set is split in halves; a logistic classifier is fit on the first
    halves (features standardised with fit-set statistics) and its error is
    measured on the held-out halves. ``quadratic`` appends squared features,
    so shifts in per-dimension spread become visible to the classifier.
    """
    z_p = _as_rows(z_p)
    z_q = _as_rows(z_q)
    if quadratic:
        z_p = np.hstack([z_p, z_p ** 2])
        z_q = np.hstack([z_q, z_q ** 2])
    if len(z_p) < 20 or len(z_q) < 20:
        raise DiagnosticError("a_distance needs at least 20 samples per side")
    rng = rng if rng is not None else Rng(0, DIAG_STREAM)
    perm_p = rng.permutation(len(z_p))
    perm_q = rng.permutation(len(z_q))
    hp, hq = len(z_p) // 2, len(z_q) // 2
    fit_x = np.vstack([z_p[perm_p[:hp]], z_q[perm_q[:hq]]])
    fit_y = np.r_[np.ones(hp), np.zeros(hq)]
    hold_x = np.vstack([z_p[perm_p[hp:]], z_q[perm_q[hq:]]])
    hold_y = np.r_[np.ones(len(z_p) - hp), np.zeros(len(z_q) - hq)]
    mu = fit_x.mean(axis=0)
    sd = fit_x.std(axis=0)
    sd[sd < 1e-12] = 1.0
    w, b = _logistic_fit((fit_x - mu) / sd, fit_y, steps, lr)
    pred = ((hold_x - mu) / sd) @ w + b > 0
    err = float(np.mean(pred != (hold_y == 1)))
    return float(np.clip(2.0 * (1.0 - 2.0 * err), 0.0, 2.0))


def cond_shift(z_p, y_p, z_q, y_q) -> float:
    """Label-conditioned squared mean discrepancy, weighted by pooled label frequency."""
    z_p, z_q = np.asarray(z_p, dtype=np.float64), np.asarray(z_q, dtype=np.float64)
    y_p, y_q = np.asarray(y_p), np.asarray(y_q)
    total_n = y_p.size + y_q.size
    out = 0.0
    for c in (0, 1):
        mp, mq = y_p == c, y_q == c
        if not mp.any() or not mq.any():
            continue
        w = (mp.sum() + mq.sum()) / total_n
        diff = z_p[mp].mean(axis=0) - z_q[mq].mean(axis=0)
        out += w * float(np.dot(diff, diff))
    return out


def _as_rows(z):
    z = np.asarray(z, dtype=np.float64)
    return z.reshape(len(z), -1)


def kl_estimate_z(model: Model, z_p, z_q) -> float:
    z_p, z_q = _as_rows(z_p), _as_rows(z_q)
    score_p = models.critic_forward(model, z_p).score
    score_q = models.critic_forward(model, z_q).score
    return adversarial_partials(score_p, score_q)[0]


def kl_estimate(model: Model, p_users, p_items, q_users, q_items) -> float:
    """Current critic's dual KL estimate between logged and uniform pair features."""
    z_p = models.forward(model, p_users, p_items).z
    z_q = models.forward(model, q_users, q_items).z
    return kl_estimate_z(model, z_p, z_q)


def fit_critic(model: Model, z_p, z_q, steps: int = 2000, lr: float = 0.01,
               batch_size: int | None = None, rng: Rng | None = None) -> list:
    """Ascend the dual KL objective over critic parameters only."""
    z_p, z_q = _as_rows(z_p), _as_rows(z_q)
    rng = rng if rng is not None else Rng(0, DIAG_STREAM)
    opt = Optimizer(lr)
    names = model.names(models.THETA)
    history = []
    for _ in range(steps):
        if batch_size:
            bp = z_p[rng.integers(len(z_p), size=batch_size)]
            bq = z_q[rng.integers(len(z_q), size=batch_size)]
        else:
            bp, bq = z_p, z_q
        cp = models.critic_forward(model, bp)
        cq = models.critic_forward(model, bq)
        value, d_p, d_q = adversarial_partials(cp.score, cq.score)
        grads = {n: np.zeros_like(model.params[n]) for n in names}
        models.critic_backward(model, cp, -d_p, grads)
        models.critic_backward(model, cq, -d_q, grads)
        opt.step(model.params, grads, names)
        model.touch()
        history.append(value)
    return history


def labeling_distance_branches(world, pair_sample: int = 100, mc_draws: int = 100_000,
                               rng: Rng | None = None) -> dict:
    """Mean |g - k| over uniform pairs (Q) and exposure-weighted pairs (P)."""
    from . import synth

    if not isinstance(world, synth.SynthWorld):
        raise UnsupportedInputError("labeling distance needs a synthetic world with oracle access")
    rng = rng if rng is not None else Rng(world.config.seed, DIAG_STREAM)
    nu, ni = world.config.n_users, world.config.n_items
    qu = rng.integers(nu, size=pair_sample)
    qi = rng.integers(ni, size=pair_sample)
    g, kk = synth.oracle_gk(world, qu, qi, mc_draws, rng.stream(DIAG_STREAM + 1))
    q_branch = float(np.mean(np.abs(g - kk)))
    au, ai = synth.all_pairs(nu, ni)
    cdf = np.cumsum(synth.expected_exposure(world, au, ai))
    pick = np.searchsorted(cdf, rng.uniform(pair_sample) * cdf[-1], side="right")
    pick = np.minimum(pick, cdf.size - 1)
    g, kk = synth.oracle_gk(world, au[pick], ai[pick], mc_draws, rng.stream(DIAG_STREAM + 2))
    p_branch = float(np.mean(np.abs(g - kk)))
    return {"Q": q_branch, "P": p_branch, "min": min(q_branch, p_branch)}


def labeling_distance(world, pair_sample: int = 100, mc_draws: int = 100_000,
                      rng: Rng | None = None) -> float:
    """Q-expectation branch of the labeling-function distance."""
    return labeling_distance_branches(world, pair_sample, mc_draws, rng)["Q"]


def embedding_samples(model: Model, dataset, n_samples: int = 2000, rng: Rng | None = None):
    """Eval-mode z for logged training pairs (P) and uniform grid pairs (Q)."""
    rng = rng if rng is not None else Rng(model.seed, DIAG_STREAM)
    logged = dataset.biased_train
    idx = rng.integers(len(logged), size=n_samples)
    z_p = models.forward(model, logged.users[idx], logged.items[idx]).z
    qu = rng.integers(dataset.n_users, size=n_samples)
    qi = rng.integers(dataset.n_items, size=n_samples)
    z_q = models.forward(model, qu, qi).z
    return z_p, logged.labels[idx], z_q, (qu, qi)


def diagnose(model: Model, dataset, world=None, n_samples: int = 2000, seed: int = 0,
             labeled_uniform: Interactions | None = None, mc_draws: int = 20_000) -> dict:
    """All shift diagnostics for one trained model."""
    rng = Rng(seed, DIAG_STREAM)
    z_p, y_p, z_q, _ = embedding_samples(model, dataset, n_samples, rng)
    out = {"a_distance": a_distance(z_p, z_q, rng.stream(DIAG_STREAM + 3)),
           "a_distance_quad": a_distance(z_p, z_q, rng.stream(DIAG_STREAM + 3), quadratic=True),
           "kl_estimate": kl_estimate_z(model, z_p, z_q)}
    uni = labeled_uniform if labeled_uniform is not None else dataset.test
    if len(uni):
        idx = rng.integers(len(uni), size=min(n_samples, len(uni)))
        z_u = models.forward(model, uni.users[idx], uni.items[idx]).z
        out["cond_shift"] = cond_shift(z_p, y_p, z_u, uni.labels[idx])
    if world is not None:
        out["labeling_distance"] = labeling_distance(world, 100, mc_draws,
                                                     rng.stream(DIAG_STREAM + 4))
    return out


def report_dict(report: MetricsReport) -> dict:
    d = asdict(report)
    d.pop("per_user", None)
    return d
