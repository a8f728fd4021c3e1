"""Figures written next to the CSV outputs (Agg backend, no display)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no embedded timestamps, so reruns produce identical files
_META = {"Software": None}


def _tidy(ax):
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    ax.grid(alpha=0.3, linewidth=0.5)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)


def plot_history(history, path, title="training history"):
    """Component losses (left) and validation NDCG@5 (right) against step."""
    steps = [r["step"] for r in history]
    fig, (ax_l, ax_r) = plt.subplots(1, 2, figsize=(9, 3.4))
    for key, label in (("loss_D", "L_D"), ("loss_A", "L_A"), ("loss_S", "L_S"),
                       ("loss_E", "L_E"), ("loss_total", "total")):
        vals = [r[key] for r in history]
        if any(v != 0 for v in vals):
            ax_l.plot(steps, vals, marker=".", label=label)
    ax_l.set_xlabel("step")
    ax_l.set_ylabel("mean loss since last eval")
    ax_l.legend(fontsize=8, frameon=False)
    ax_r.plot(steps, [r["val_ndcg5"] for r in history], marker="o", color="C3")
    ax_r.set_xlabel("step")
    ax_r.set_ylabel("validation NDCG@5")
    for ax in (ax_l, ax_r):
        _tidy(ax)
    fig.suptitle(title, fontsize=10)
    _save(fig, path)


def plot_bars(labels, means, errors, path, ylabel, title=""):
    """One bar per run label with optional standard-error whiskers."""
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(labels)), 3.4))
    x = np.arange(len(labels))
    errs = None if errors is None else [0.0 if e is None or math.isnan(e) else e for e in errors]
    ax.bar(x, means, yerr=errs, capsize=3, color=[f"C{i % 10}" for i in x])
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=8)
    finite = [m for m in means if not math.isnan(m)]
    if finite:
        lo, hi = min(finite), max(finite)
        pad = max(0.02, 0.5 * (hi - lo))
        ax.set_ylim(max(0.0, lo - pad), hi + pad)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    _tidy(ax)
    _save(fig, path)


def plot_diagnostics(rows, path, metrics=("a_distance", "a_distance_quad", "cond_shift", "kl_estimate")):
    """Grouped bars: one group per diagnostic, one bar per run."""
    present = [m for m in metrics if any(m in r for r in rows)]
    if not present:
        return
    fig, axes = plt.subplots(1, len(present), figsize=(3.2 * len(present), 3.2), squeeze=False)
    labels = [r.get("label", str(i)) for i, r in enumerate(rows)]
    for ax, metric in zip(axes[0], present):
        vals = [r.get(metric, float("nan")) for r in rows]
        ax.bar(np.arange(len(vals)), vals, color=[f"C{i % 10}" for i in range(len(vals))])
        ax.set_xticks(np.arange(len(vals)))
        ax.set_xticklabels(labels, rotation=25, ha="right", fontsize=8)
        ax.set_title(metric, fontsize=9)
        _tidy(ax)
    _save(fig, path)


def plot_sweep(rows, params, path, metric="val_ndcg5"):
    """Line plot for one swept parameter, heatmap for two, bars otherwise."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    if len(params) == 1:
        p = params[0]
        xs = [r[p] for r in rows]
        ax.plot(range(len(xs)), [r[metric] for r in rows], marker="o")
        ax.set_xticks(range(len(xs)))
        ax.set_xticklabels([str(x) for x in xs])
        ax.set_xlabel(p)
        ax.set_ylabel(metric)
        _tidy(ax)
    elif len(params) == 2:
        p, q = params
        xs = list(dict.fromkeys(r[p] for r in rows))
        ys = list(dict.fromkeys(r[q] for r in rows))
        grid = np.full((len(ys), len(xs)), np.nan)
        for r in rows:
            grid[ys.index(r[q]), xs.index(r[p])] = r[metric]
        im = ax.imshow(grid, origin="lower", cmap="viridis", aspect="auto")
        ax.set_xticks(range(len(xs)))
        ax.set_xticklabels([str(x) for x in xs])
        ax.set_yticks(range(len(ys)))
        ax.set_yticklabels([str(y) for y in ys])
        ax.set_xlabel(p)
        ax.set_ylabel(q)
        for (i, j), v in np.ndenumerate(grid):
            if not np.isnan(v):
                ax.text(j, i, f"{v:.3f}", ha="center", va="center", fontsize=7, color="w")
        fig.colorbar(im, ax=ax, label=metric)
    else:
        ax.bar(range(len(rows)), [r[metric] for r in rows])
        ax.set_xlabel("cell")
        ax.set_ylabel(metric)
        _tidy(ax)
    _save(fig, path)
