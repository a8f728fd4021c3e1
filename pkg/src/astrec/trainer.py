"""Adversarial self-training and the baseline training loops.

Every source of randomness has its own stream derived from the config seed
(initialisation, batch_D indices, uniform pair draws, and the two dropout
streams), so objectives that share a computation path also share their
random draws step for step.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import evaluation, models
from .data import Dataset, Interactions, sample_negatives, drop_negatives
from .errors import ConfigurationError, TrainingError
from .losses import (LossWeights, estimate_propensity, loss_biased_erm, loss_ips,
                     loss_multitask, loss_total, adversarial_partials)
from .models import PHI, PSI, THETA, Model
from .numcore import Optimizer, Rng

log = logging.getLogger(__name__)

BIASED = "Biased"
IPS = "IPS"
MULTITASK = "MultiTask"
AST = "AST"
OBJECTIVES = (BIASED, IPS, MULTITASK, AST)
MAX_STEPS = "MaxSteps"
EARLY_STOP = "EarlyStop"
HISTORY_COLUMNS = ("step", "loss_D", "loss_A", "loss_S", "loss_E", "loss_total", "val_ndcg5")

STREAM_INIT = 10
STREAM_BATCH_D = 11
STREAM_BATCH_Q = 12
STREAM_DROP_D = 13
STREAM_DROP_Q = 14
STREAM_NEG = 15


@dataclass
class TrainConfig:
    objective: str = AST
    weights: LossWeights = field(default_factory=LossWeights)
    lr: float = 0.005
    max_steps: int = 20_000
    batch_size_D: int = 512
    batch_size_Q: int = 512
    teacher_refresh: int = 100
    eval_every: int = 500
    patience: int = 10
    k: int = 16
    dropout_rate: float = 0.2
    variant: str = models.MF
    seed: int = 0
    weight_decay: float = 1e-5
    optimizer: str = "adam"
    critic_lr: float | None = None
    critic_steps: int = 1
    critic_width: int = 16
    entropy_updates_head: bool = False
    propensity_tau: float = 1.0
    eval_k: int = 5
    implicit: bool = False
    neg_ratio: int = 4

    def __post_init__(self):
        if isinstance(self.weights, dict):
            self.weights = LossWeights(**self.weights)
        self.validate()

    def validate(self):
        if self.objective not in OBJECTIVES:
            raise ConfigurationError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be >= 1")
        if min(self.batch_size_D, self.batch_size_Q) < 1:
            raise ConfigurationError("batch sizes must be >= 1")
        if self.patience < 1 or self.eval_every < 1 or self.teacher_refresh < 1:
            raise ConfigurationError("patience, eval_every and teacher_refresh must be >= 1")
        # lr == 0 is accepted and means "never update"
        if self.lr < 0 or (self.critic_lr is not None and self.critic_lr <= 0):
            raise ConfigurationError("learning rates must be positive")
        if self.critic_steps < 1:
            raise ConfigurationError("critic_steps must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.variant not in (models.MF, models.NCF):
            raise ConfigurationError(f"unknown variant {self.variant!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown trainer settings: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainResult:
    best_model: Model
    history: list
    stop_reason: str
    best_step: int
    final_model: Model | None = None
    config: TrainConfig | None = None
    checkpoint_path: str | None = None

    @property
    def best_val_ndcg(self) -> float:
        vals = [row["val_ndcg5"] for row in self.history if not math.isnan(row["val_ndcg5"])]
        return max(vals) if vals else float("nan")

    def write_history_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS)
            writer.writeheader()
            for row in self.history:
                writer.writerow({c: row[c] for c in HISTORY_COLUMNS})


def _training_pool(dataset: Dataset, config: TrainConfig, rng_neg: Rng | None) -> Interactions:
    pool = dataset.training_pool()
    if config.implicit:
        pos = drop_negatives(pool)
        negs = sample_negatives(pos, dataset.n_items, config.neg_ratio, rng_neg, observed=pool)
        pool = Interactions.concat([pos, negs])
    return pool


def _validation_ndcg(model: Model, dataset: Dataset, k: int) -> float:
    if len(dataset.validation) == 0:
        return float("nan")
    return evaluation.evaluate(model, dataset.validation, k).ndcg_at_k


def _critic_only_step(model, batch_d, q_users, q_items, critic_opt, names):
    trace_d = models.forward(model, batch_d.users, batch_d.items)
    logged = np.flatnonzero(batch_d.sources == 0)
    if not logged.size:
        return
    trace_q = models.forward(model, q_users, q_items)
    cp = models.critic_forward(model, trace_d.z[logged])
    cq = models.critic_forward(model, trace_q.z)
    _, d_p, d_q = adversarial_partials(cp.score, cq.score)
    grads = {n: np.zeros_like(model.params[n]) for n in names}
    models.critic_backward(model, cp, -d_p, grads)
    models.critic_backward(model, cq, -d_q, grads)
    critic_opt.step(model.params, grads, names)
    model.touch()


def train(dataset: Dataset, config: TrainConfig, rng: Rng | None = None,
          callback=None) -> TrainResult:
    """Run one training job; returns the best-validation model and history.

    ``callback(step, model, teacher)`` is called after every update.
    """
    config.validate()
    seed = config.seed if rng is None else rng.seed
    nu, ni = dataset.n_users, dataset.n_items
    model = models.init(config.variant, nu, ni, config.k, config.dropout_rate,
                        Rng(seed, STREAM_INIT), config.critic_width, seed)
    rng_d, rng_q = Rng(seed, STREAM_BATCH_D), Rng(seed, STREAM_BATCH_Q)
    drop_d, drop_q = Rng(seed, STREAM_DROP_D), Rng(seed, STREAM_DROP_Q)
    w = config.weights
    obj = config.objective

    pool = _training_pool(dataset, config, Rng(seed, STREAM_NEG))
    if obj == MULTITASK:
        pool = dataset.biased_train
        labeled_q = dataset.uniform_train
    if len(pool) == 0:
        raise ConfigurationError("no training interactions")
    props = None
    if obj == IPS:
        props = estimate_propensity(dataset.biased_train, nu, ni, config.propensity_tau, w.ips_clip)

    opt = Optimizer(config.lr, weight_decay=config.weight_decay, kind=config.optimizer)
    critic_opt = Optimizer(config.critic_lr or config.lr, weight_decay=config.weight_decay,
                           kind=config.optimizer)
    main_names = model.names(PHI, PSI)
    critic_names = model.names(THETA)
    use_critic = obj == AST and w.alpha > 0

    history = []
    best_val, best_model, best_step = -math.inf, model.snapshot(), 0
    since_best = 0
    stop_reason = MAX_STEPS
    acc = {"D": 0.0, "A": 0.0, "S": 0.0, "E": 0.0, "total": 0.0}
    acc_n = 0
    teacher = None

    for step in range(1, config.max_steps + 1):
        batch = pool[rng_d.integers(len(pool), size=config.batch_size_D)]
        q_users = rng_q.integers(nu, size=config.batch_size_Q)
        q_items = rng_q.integers(ni, size=config.batch_size_Q)

        if obj == AST:
            if (step - 1) % config.teacher_refresh == 0:
                teacher = model.snapshot()
            if use_critic and config.lr > 0:
                for _ in range(config.critic_steps - 1):
                    _critic_only_step(model, batch, q_users, q_items, critic_opt, critic_names)
            res = loss_total(model, teacher, batch, q_users, q_items, w, drop_d, drop_q,
                             config.entropy_updates_head)
            value, grads, comps = res.value, res.grads, res.components
        elif obj == BIASED:
            value, d_logit, trace = loss_biased_erm(model, batch, drop_d)
            grads = models.backward(model, trace, d_logit=d_logit)
            comps = {"D": value}
        elif obj == IPS:
            value, d_logit, trace = loss_ips(model, batch, props, drop_d)
            grads = models.backward(model, trace, d_logit=d_logit)
            comps = {"D": value}
        else:
            bq = labeled_q[rng_q.integers(len(labeled_q), size=config.batch_size_Q)] \
                if len(labeled_q) else labeled_q
            value, grads = loss_multitask(model, batch, bq, w, drop_d)
            comps = {"D": value}

        if not math.isfinite(value):
            bad = next((k for k, v in comps.items() if not math.isfinite(v)), "total")
            raise TrainingError(f"non-finite loss at step {step} in component {bad}",
                                step=step, component=bad)
        for key, v in comps.items():
            acc[key] += v
        acc["total"] += value
        acc_n += 1

        if config.lr > 0:
            opt.step(model.params, grads, main_names)
            if use_critic:
                critic_opt.step(model.params, grads, critic_names)
            model.touch()
        if callback is not None:
            callback(step, model, teacher)

        if step % config.eval_every == 0 or step == config.max_steps:
            val = _validation_ndcg(model, dataset, config.eval_k)
            row = {"step": step, "loss_D": acc["D"] / acc_n, "loss_A": acc["A"] / acc_n,
                   "loss_S": acc["S"] / acc_n, "loss_E": acc["E"] / acc_n,
                   "loss_total": acc["total"] / acc_n, "val_ndcg5": val}
            history.append(row)
            acc = dict.fromkeys(acc, 0.0)
            acc_n = 0
            log.debug("step %d loss %.5f val_ndcg5 %.5f", step, row["loss_total"], val)
            if math.isnan(val) or val > best_val:
                best_val = val if not math.isnan(val) else best_val
                best_model, best_step = model.snapshot(), step
                since_best = 0
            else:
                since_best += 1
                if since_best >= config.patience:
                    stop_reason = EARLY_STOP
                    break

    return TrainResult(best_model, history, stop_reason, best_step, model, config)


def ablate(dataset: Dataset, config: TrainConfig, components=(), rng: Rng | None = None) -> list:
    """Full AST plus one run per removed component (A, S or E).

    Returns ``[(label, TrainResult), ...]`` starting with the full model.
    """
    zeroed = {"A": "alpha", "S": "beta", "E": "gamma"}
    bad = set(components) - set(zeroed)
    if bad:
        raise ConfigurationError(f"unknown ablation components {sorted(bad)}")
    base = replace(config, objective=AST)
    runs = [("AST", base)]
    for comp in sorted(components, key="ASE".index):
        weights = replace(base.weights, **{zeroed[comp]: 0.0})
        runs.append((f"AST w/o {comp}", replace(base, weights=weights)))
    return [(label, train(dataset, cfg, rng)) for label, cfg in runs]
