"""Command-line entry point: ``astrec <command> [options]``.

Every command reads one JSON config (``--config``) with dotted overrides
(``--set trainer.lr=0.01``), writes its resolved config, a manifest with
content hashes, CSV tables and figures into ``--out``, logs to stderr and
prints a short summary to stdout.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical or
training error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import evaluation, models, synth, trainer
from .data import (LOGGED, UNIFORM, Dataset, IdMap, Interactions, load_matrix_ascii, load_triples,
                   split_uniform)
from .errors import (ConfigurationError, DataError, GenerationError, NumericalError,
                     UnsupportedInputError, ValidationError)
from .numcore import Rng

log = logging.getLogger("astrec")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
STREAM_SIDECAR = 6
__version__ = "0.1.0"


# ---------------------------------------------------------------- helpers

def write_csv(path, rows, columns=None):
    """RFC 4180 CSV (CRLF line ends, header row, minimal quoting)."""
    rows = list(rows)
    if columns is None:
        columns = list(dict.fromkeys(k for r in rows for k in r))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for r in rows:
            writer.writerow({c: r.get(c, "") for c in columns})
    return columns


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def mean_stderr_rows(rows, label_key, metrics):
    """Append ``mean`` and ``stderr`` rows per label over the seed rows."""
    out = []
    labels = list(dict.fromkeys(r[label_key] for r in rows))
    for label in labels:
        group = [r for r in rows if r[label_key] == label]
        mean_row = {label_key: label, "seed": "mean"}
        se_row = {label_key: label, "seed": "stderr"}
        for m in metrics:
            vals = np.array([r[m] for r in group if m in r], dtype=np.float64)
            vals = vals[~np.isnan(vals)]
            mean_row[m] = float(vals.mean()) if vals.size else float("nan")
            se_row[m] = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else float("nan")
        out.extend([mean_row, se_row])
    return out


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, cfg: dict, inputs=(), extra=None):
    produced = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            produced[str(p.relative_to(out))] = cfgmod.git_blob_hash(p.read_bytes())
    manifest = {
        "command": command,
        "version": __version__,
        "seed": cfg["trainer"]["seed"],
        "synth_seed": cfg["synth"]["seed"],
        "config_hash": cfgmod.git_blob_hash(cfgmod.dump(cfg).encode()),
        "inputs": cfgmod.hash_inputs(inputs),
        "outputs": produced,
    }
    manifest.update(extra or {})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_resolved(out: Path, cfg: dict):
    (out / "resolved_config.json").write_text(cfgmod.dump(cfg))


def _data_inputs(cfg):
    d = cfg["data"]
    return [p for p in (d["dir"], d["biased"], d["uniform"]) if p]


def _load_raw(path, d, source, user_map, item_map):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"data file not found: {path}")
    if d["format"] == "matrix":
        return load_matrix_ascii(path, d["threshold"], source)
    if d["format"] != "triples":
        raise ConfigurationError(f"data.format must be 'triples' or 'matrix', got {d['format']!r}")
    return load_triples(path, d["separator"], d["one_based"], d["threshold"], source,
                        remap=True, user_map=user_map, item_map=item_map)


def build_dataset_from_raw(cfg) -> Dataset:
    """Biased file plus optional uniform file, uniform split per data.fractions."""
    d = cfg["data"]
    if not d["biased"]:
        raise ConfigurationError("set data.dir (prepared dataset) or data.biased (raw file)")
    user_map, item_map = IdMap(), IdMap()
    biased, nu, ni = _load_raw(d["biased"], d, LOGGED, user_map, item_map)
    uniform = Interactions(sources=UNIFORM)
    if d["uniform"]:
        uniform, nu2, ni2 = _load_raw(d["uniform"], d, UNIFORM, user_map, item_map)
        nu, ni = max(nu, nu2), max(ni, ni2)
    if d["format"] == "triples":
        nu, ni = len(user_map), len(item_map)
    parts = split_uniform(uniform, d["fractions"], Rng(d["split_seed"], synth.STREAM_SPLIT))
    maps = {"user_map": user_map, "item_map": item_map} if d["format"] == "triples" else {}
    return Dataset(nu, ni, biased, *parts, **maps)


def load_dataset(cfg) -> Dataset:
    d = cfg["data"]
    if d["dir"]:
        path = Path(d["dir"])
        if not path.exists():
            raise FileNotFoundError(f"dataset directory not found: {path}")
        return Dataset.load(path)
    return build_dataset_from_raw(cfg)


def load_world(path):
    """Rebuild the synthetic world recorded in a ``synth`` output manifest."""
    manifest = Path(path) / "manifest.json"
    if not manifest.exists():
        raise FileNotFoundError(f"synth manifest not found: {manifest}")
    meta = json.loads(manifest.read_text())
    if "synth_config" not in meta:
        raise UnsupportedInputError(f"{manifest} does not describe a synthetic world")
    return synth.build_world(synth.SynthConfig(**meta["synth_config"]))


def _seeds(cfg):
    n = cfg.get("seeds")
    return [cfg["trainer"]["seed"]] if not n else list(range(int(n)))


def _metrics_row(model, dataset, k, hr_mode, prefix):
    split = getattr(dataset, prefix)
    if not len(split):
        return {}
    rep = evaluation.evaluate(model, split, k, hr_mode)
    short = "val" if prefix == "validation" else prefix
    return {f"{short}_ndcg{k}": rep.ndcg_at_k, f"{short}_hr{k}": rep.hr_at_k,
            f"{short}_hr_anyhit{k}": rep.hr_anyhit}


def _train_one(dataset, tcfg, out: Path | None, eval_cfg, plots, title):
    res = trainer.train(dataset, tcfg)
    k, mode = eval_cfg["k"], eval_cfg["hr_mode"]
    row = {"seed": tcfg.seed, "best_step": res.best_step, "stop_reason": res.stop_reason}
    row.update(_metrics_row(res.best_model, dataset, k, mode, "validation"))
    row.update(_metrics_row(res.best_model, dataset, k, mode, "test"))
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        res.write_history_csv(out / "history.csv")
        models.save_checkpoint(res.best_model, out / "best.ckpt",
                               extra={"objective": tcfg.objective, "best_step": res.best_step})
        write_csv(out / "metrics.csv", [row])
        if plots:
            from . import plotting
            plotting.plot_history(res.history, out / "history.png", title)
    return res, row


# --------------------------------------------------------------- commands

def cmd_synth(args, cfg):
    out = _out_dir(args)
    scfg = cfgmod.synth_config(cfg)
    world = synth.build_world(scfg)
    ds = synth.build_dataset(world, cfg["data"]["fractions"])
    ds.save(out)
    n_side = int(cfg["synth_output"]["sidecar_pairs"])
    if args.pairs:
        pairs, _, _ = _read_pairs(args.pairs)
        users, items = pairs
    else:
        rng = Rng(scfg.seed, STREAM_SIDECAR)
        users = rng.integers(scfg.n_users, size=n_side)
        items = rng.integers(scfg.n_items, size=n_side)
    if np.any(users >= scfg.n_users) or np.any(items >= scfg.n_items):
        raise ValidationError("sidecar pair ids outside the synthetic universe")
    g, k = synth.oracle_gk(world, users, items, int(cfg["synth_output"]["mc_draws"]))
    gq = synth.expected_preference(world, users, items)
    prop = synth.expected_exposure(world, users, items)
    write_csv(out / "ground_truth.csv",
              [{"user": int(u), "item": int(i), "g": float(a), "k": float(b),
                "g_quadrature": float(c), "propensity": float(p)}
               for u, i, a, b, c, p in zip(users, items, g, k, gq, prop)])
    _write_resolved(out, cfg)
    _write_manifest(out, "synth", cfg, [args.pairs] if args.pairs else [],
                    {"synth_config": scfg.to_dict(), "counts": ds.sizes(),
                     "achieved_density": world.achieved_density,
                     "exposure_scale_offset": world.exposure_scale_offset})
    print(f"synthetic world seed {scfg.seed}: " +
          ", ".join(f"{k}={v}" for k, v in ds.sizes().items()))


def _read_pairs(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"pair file not found: {path}")
    users, items = [], []
    for n, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.replace(",", " ").split()
        try:
            users.append(int(parts[0]))
            items.append(int(parts[1]))
        except (ValueError, IndexError):
            from .errors import ParseError
            raise ParseError("expected 'user item'", n) from None
    return (np.array(users, dtype=np.int64), np.array(items, dtype=np.int64)), len(users), None


def cmd_prepare(args, cfg):
    out = _out_dir(args)
    ds = build_dataset_from_raw(cfg)
    ds.save(out)
    _write_resolved(out, cfg)
    _write_manifest(out, "prepare", cfg, _data_inputs(cfg), {"counts": ds.sizes()})
    print(f"prepared {ds.n_users} users x {ds.n_items} items: " +
          ", ".join(f"{k}={v}" for k, v in ds.sizes().items()))


def cmd_train(args, cfg):
    dataset = load_dataset(cfg)
    out = _out_dir(args)
    base = cfgmod.train_config(cfg)
    seeds = _seeds(cfg)
    rows = []
    for seed in seeds:
        tcfg = copy.deepcopy(base)
        tcfg.seed = seed
        run_dir = out if len(seeds) == 1 and not cfg.get("seeds") else out / f"seed_{seed}"
        _, row = _train_one(dataset, tcfg, run_dir, cfg["eval"], cfg["plots"],
                            f"{tcfg.objective} seed {seed}")
        row = {"objective": tcfg.objective, **row}
        rows.append(row)
        log.info("seed %d done: %s", seed, row)
    metrics = [c for c in rows[0] if c.startswith(("val_", "test_"))]
    table = rows + (mean_stderr_rows(rows, "objective", metrics) if len(rows) > 1 else [])
    write_csv(out / "results.csv", table)
    _write_resolved(out, cfg)
    _write_manifest(out, "train", cfg, _data_inputs(cfg))
    _print_table(table)


def _check_dims(model, dataset):
    if (model.n_users, model.n_items) != (dataset.n_users, dataset.n_items):
        raise ValidationError(f"checkpoint is {model.n_users}x{model.n_items} but dataset is "
                              f"{dataset.n_users}x{dataset.n_items}")


def _load_checkpoint(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return models.load_checkpoint(path)


def _world_for(cfg):
    return load_world(cfg["eval"]["world"]) if cfg["eval"]["world"] else None


def cmd_evaluate(args, cfg):
    dataset = load_dataset(cfg)
    model = _load_checkpoint(args.checkpoint)
    _check_dims(model, dataset)
    ev = cfg["eval"]
    split = getattr(dataset, args.split)
    rep = evaluation.evaluate(model, split, ev["k"], ev["hr_mode"])
    row = {"checkpoint": str(args.checkpoint), "split": args.split, **rep.to_row()}
    if ev["diagnostics"]:
        row.update(evaluation.diagnose(model, dataset, _world_for(cfg), ev["n_samples"],
                                       cfg["trainer"]["seed"], mc_draws=ev["mc_draws"]))
    out = _out_dir(args)
    write_csv(out / "metrics.csv", [row])
    _write_resolved(out, cfg)
    _write_manifest(out, "evaluate", cfg, _data_inputs(cfg) + [args.checkpoint])
    print(f"{args.split}: NDCG@{ev['k']}={rep.ndcg_at_k:.4f} HR@{ev['k']}({rep.hr_mode})="
          f"{rep.hr_at_k:.4f} users={rep.n_users_evaluated} skipped={rep.n_users_skipped}")


def _labelled_checkpoints(specs):
    out = []
    for text in specs:
        label, sep, path = text.partition("=")
        if not sep:
            label, path = Path(text).parent.name or Path(text).stem, text
        out.append((label, path))
    return out


def cmd_diagnose(args, cfg):
    dataset = load_dataset(cfg)
    ev = cfg["eval"]
    world = _world_for(cfg)
    loaded = []
    for label, path in _labelled_checkpoints(args.checkpoint):
        model = _load_checkpoint(path)
        _check_dims(model, dataset)
        loaded.append((label, path, model))
    rows = []
    for label, path, model in loaded:
        row = {"label": label, "checkpoint": str(path)}
        row.update(evaluation.diagnose(model, dataset, world, ev["n_samples"],
                                       cfg["trainer"]["seed"], mc_draws=ev["mc_draws"]))
        rows.append(row)
    if world is not None:
        branches = evaluation.labeling_distance_branches(world, 100, ev["mc_draws"])
        for r in rows:
            r.update({"labeling_distance_P": branches["P"], "labeling_distance_min": branches["min"]})
    out = _out_dir(args)
    if args.embeddings:
        for label, _, model in loaded:
            _dump_embeddings(model, dataset, ev["n_samples"], cfg["trainer"]["seed"],
                             out / f"embeddings_{label}.csv")
    write_csv(out / "diagnostics.csv", rows)
    if cfg["plots"]:
        from . import plotting
        plotting.plot_diagnostics(rows, out / "diagnostics.png")
    _write_resolved(out, cfg)
    _write_manifest(out, "diagnose", cfg, _data_inputs(cfg) + [p for _, p, _ in loaded])
    _print_table(rows)


def _dump_embeddings(model, dataset, n_samples, seed, path):
    """Sampled P and Q embeddings for external plotting (one row per sample)."""
    rng = Rng(seed, evaluation.DIAG_STREAM)
    z_p, y_p, z_q, _ = evaluation.embedding_samples(model, dataset, n_samples, rng)
    cols = [f"z{j}" for j in range(z_p.shape[1])]
    rows = [{"domain": "P", "label": int(y), **dict(zip(cols, z.tolist()))} for z, y in zip(z_p, y_p)]
    rows += [{"domain": "Q", "label": "", **dict(zip(cols, z.tolist()))} for z in z_q]
    write_csv(path, rows, ["domain", "label"] + cols)


def cmd_ablate(args, cfg):
    dataset = load_dataset(cfg)
    out = _out_dir(args)
    comps = [c.strip() for c in args.components.split(",") if c.strip()]
    base = cfgmod.train_config(cfg)
    ev = cfg["eval"]
    world = _world_for(cfg)
    rows = []
    for seed in _seeds(cfg):
        seeded = copy.deepcopy(base)
        seeded.seed = seed
        runs = trainer.ablate(dataset, seeded, comps)
        if not args.no_baseline:
            runs.append(("Biased", trainer.train(dataset, replace(seeded, objective=trainer.BIASED))))
        for label, res in runs:
            row = {"label": label, "seed": seed, "best_step": res.best_step}
            row.update(_metrics_row(res.best_model, dataset, ev["k"], ev["hr_mode"], "validation"))
            row.update(_metrics_row(res.best_model, dataset, ev["k"], ev["hr_mode"], "test"))
            row.update(evaluation.diagnose(res.best_model, dataset, world, ev["n_samples"], seed,
                                           mc_draws=ev["mc_draws"]))
            rows.append(row)
            run_dir = out / "runs" / f"{label.replace(' ', '_').replace('/', '')}_seed{seed}"
            run_dir.mkdir(parents=True, exist_ok=True)
            res.write_history_csv(run_dir / "history.csv")
            models.save_checkpoint(res.best_model, run_dir / "best.ckpt", extra={"label": label})
            log.info("%s seed %d: %s", label, seed, row)
    metrics = [c for c in rows[0] if c.startswith(("val_", "test_")) or c in
               ("a_distance", "a_distance_quad", "cond_shift", "kl_estimate",
                                                 "labeling_distance")]
    summary = mean_stderr_rows(rows, "label", metrics)
    write_csv(out / "ablation.csv", rows + summary)
    if cfg["plots"]:
        from . import plotting
        means = [r for r in summary if r["seed"] == "mean"]
        errs = [r for r in summary if r["seed"] == "stderr"]
        key = f"val_ndcg{ev['k']}"
        plotting.plot_bars([r["label"] for r in means], [r[key] for r in means],
                           [r[key] for r in errs], out / "ablation.png",
                           f"validation NDCG@{ev['k']}", "ablation")
        plotting.plot_diagnostics(means, out / "diagnostics.png")
    _write_resolved(out, cfg)
    _write_manifest(out, "ablate", cfg, _data_inputs(cfg))
    _print_table(summary)


def _grid_cells(grid: dict):
    keys = list(grid)
    for k in keys:
        if not isinstance(grid[k], list) or not grid[k]:
            raise ConfigurationError(f"sweep grid entry {k!r} must be a non-empty list")
    return keys, [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def _sweep_cell(job):
    """Run one grid cell (module level so worker processes can pickle it)."""
    index, cfg, cell, out = job
    for key, value in cell.items():
        cfgmod.set_path(cfg, key, value)
    cfgmod.validate(cfg)
    dataset = load_dataset(cfg)
    cell_dir = Path(out) / f"cell_{index:03d}"
    cell_dir.mkdir(parents=True, exist_ok=True)
    _write_resolved(cell_dir, cfg)
    rows = []
    for seed in _seeds(cfg):
        tcfg = cfgmod.train_config(cfg)
        tcfg.seed = seed
        sub = cell_dir if len(_seeds(cfg)) == 1 else cell_dir / f"seed_{seed}"
        _, row = _train_one(dataset, tcfg, sub, cfg["eval"], False, "")
        rows.append(row)
    k = cfg["eval"]["k"]
    result = {"cell": index, **cell}
    for key in (f"val_ndcg{k}", f"test_ndcg{k}", f"test_hr{k}"):
        vals = [r[key] for r in rows if key in r]
        result[key] = float(np.mean(vals)) if vals else float("nan")
    return result


def cmd_sweep(args, cfg):
    grid = dict(cfg["sweep"]["grid"])
    for text in args.grid or []:
        key, _, values = text.partition("=")
        grid[key.strip()] = [cfgmod.parse_value(v) for v in values.split(",")]
    cfg["sweep"]["grid"] = grid
    keys, cells = _grid_cells(grid)
    for key in keys:
        cfgmod.get_path(cfg, key)
    out = _out_dir(args)
    jobs = [(i, copy.deepcopy(cfg), cell, str(out)) for i, cell in enumerate(cells)]
    if args.parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(job) for job in jobs]
    key = f"val_ndcg{cfg['eval']['k']}"
    vals = np.array([r[key] for r in rows], dtype=np.float64)
    best = int(np.nanargmax(vals)) if np.any(~np.isnan(vals)) else 0
    for i, r in enumerate(rows):
        r["best"] = int(i == best)
    write_csv(out / "sweep.csv", rows)
    if cfg["plots"] and keys:
        from . import plotting
        plotting.plot_sweep(rows, keys, out / "sweep.png", key)
    _write_resolved(out, cfg)
    _write_manifest(out, "sweep", cfg, _data_inputs(cfg))
    _print_table(rows)


def _print_table(rows):
    if not rows:
        return
    cols = list(dict.fromkeys(k for r in rows for k in r))
    print("\t".join(cols))
    for r in rows:
        cells = []
        for c in cols:
            v = r.get(c, "")
            cells.append(f"{v:.4f}" if isinstance(v, float) else str(v))
        print("\t".join(cells))


# ------------------------------------------------------------------ main

COMMANDS = {
    "synth": cmd_synth, "prepare": cmd_prepare, "train": cmd_train, "evaluate": cmd_evaluate,
    "diagnose": cmd_diagnose, "ablate": cmd_ablate, "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="astrec", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted override, e.g. trainer.lr=0.01 (repeatable)")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--data", help="prepared dataset directory (sets data.dir)")
        p.add_argument("--seed", type=int, help="training seed (sets trainer.seed)")
        p.add_argument("--seeds", type=int, help="run seeds 0..N-1 and add mean/stderr rows")
        p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
        p.add_argument("-v", "--verbose", action="count", default=0)
        return p

    p = common(sub.add_parser("synth", help="generate a semi-synthetic MNAR dataset"))
    p.add_argument("--pairs", help="file of 'user item' pairs for the ground-truth sidecar")
    common(sub.add_parser("prepare", help="load raw Yahoo/Coat-style files and split"))
    common(sub.add_parser("train", help="train one objective"))
    p = common(sub.add_parser("evaluate", help="rank metrics for a checkpoint"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=["validation", "test"])
    p.add_argument("--diagnostics", action="store_true", help="also compute shift diagnostics")
    p = common(sub.add_parser("diagnose", help="shift diagnostics for checkpoints"))
    p.add_argument("--checkpoint", action="append", required=True, metavar="[LABEL=]PATH")
    p.add_argument("--embeddings", action="store_true", help="also dump sampled embeddings as CSV")
    p = common(sub.add_parser("ablate", help="full AST against single-component ablations"))
    p.add_argument("--components", default="A,S,E")
    p.add_argument("--no-baseline", action="store_true", help="skip the Biased reference run")
    p = common(sub.add_parser("sweep", help="grid sweep over config values"))
    p.add_argument("--grid", action="append", metavar="KEY=V1,V2,...")
    p.add_argument("--parallel", type=int, default=1, help="worker processes for grid cells")
    return parser


def resolve_config(args) -> dict:
    cfg = cfgmod.default_config()
    overrides = list(args.set)
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            user = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON: {exc}") from None
        cfgmod._merge(cfg, user)
    for text in overrides:
        cfgmod.apply_override(cfg, text)
    if args.data:
        cfg["data"]["dir"] = args.data
    if args.seed is not None:
        cfg["trainer"]["seed"] = args.seed
    if args.seeds is not None:
        if args.seeds < 1:
            raise ConfigurationError("--seeds must be >= 1")
        cfg["seeds"] = args.seeds
    if getattr(args, "diagnostics", False):
        cfg["eval"]["diagnostics"] = True
    if args.no_plots:
        cfg["plots"] = False
    cfgmod.validate(cfg)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
                        level=logging.WARNING - 10 * min(args.verbose, 2))
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](args, cfg)
    except (ConfigurationError, GenerationError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (DataError, UnsupportedInputError, FileNotFoundError, OSError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except NumericalError as exc:
        log.error("numerical error: %s", exc)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
