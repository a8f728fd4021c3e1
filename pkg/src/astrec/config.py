"""Run configuration: one JSON document plus dotted ``--set`` overrides."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .data import DEFAULT_FRACTIONS, DEFAULT_THRESHOLD
from .errors import ConfigurationError
from .evaluation import RECALL
from .synth import SynthConfig
from .trainer import TrainConfig


def default_config() -> dict:
    return {
        "data": {
            "dir": None,
            "biased": None,
            "uniform": None,
            "format": "triples",
            "separator": "\t",
            "one_based": False,
            "threshold": DEFAULT_THRESHOLD,
            "fractions": list(DEFAULT_FRACTIONS),
            "split_seed": 0,
        },
        "synth": SynthConfig().to_dict(),
        "trainer": TrainConfig().to_dict(),
        "eval": {
            "k": 5,
            "hr_mode": RECALL,
            "diagnostics": False,
            "n_samples": 2000,
            "mc_draws": 20_000,
            "world": None,
        },
        "synth_output": {"sidecar_pairs": 200, "mc_draws": 100_000},
        "sweep": {"grid": {}},
        "seeds": None,
        "plots": True,
    }


def _merge(base: dict, update: dict, path: str = ""):
    for key, value in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigurationError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and key != "grid":
            if not isinstance(value, dict):
                raise ConfigurationError(f"config key {where!r} must be an object")
            _merge(base[key], value, where + ".")
        else:
            base[key] = value


def parse_value(text: str):
    """JSON literal if it parses, otherwise the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def set_path(cfg: dict, dotted: str, value):
    keys = dotted.split(".")
    node = cfg
    for i, key in enumerate(keys[:-1]):
        if not isinstance(node, dict) or key not in node:
            raise ConfigurationError(f"unknown config key {'.'.join(keys[:i + 1])!r}")
        node = node[key]
    last = keys[-1]
    if not isinstance(node, dict) or (last not in node and keys[:-1] != ["sweep", "grid"]):
        raise ConfigurationError(f"unknown config key {dotted!r}")
    node[last] = value


def get_path(cfg: dict, dotted: str):
    node = cfg
    for key in dotted.split("."):
        if not isinstance(node, dict) or key not in node:
            raise ConfigurationError(f"unknown config key {dotted!r}")
        node = node[key]
    return node


def apply_override(cfg: dict, text: str):
    if "=" not in text:
        raise ConfigurationError(f"override must look like a.b=value, got {text!r}")
    key, _, raw = text.partition("=")
    set_path(cfg, key.strip(), parse_value(raw.strip()))


def load_config(path=None, overrides=()) -> dict:
    cfg = default_config()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            user = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigurationError(f"{path}: top level must be an object")
        _merge(cfg, user)
    for text in overrides:
        apply_override(cfg, text)
    validate(cfg)
    return cfg


def validate(cfg: dict):
    synth_config(cfg)
    train_config(cfg)
    if cfg["eval"]["k"] < 1:
        raise ConfigurationError("eval.k must be >= 1")


def synth_config(cfg: dict) -> SynthConfig:
    try:
        return SynthConfig(**cfg["synth"])
    except TypeError as exc:
        raise ConfigurationError(f"synth: {exc}") from None


def train_config(cfg: dict) -> TrainConfig:
    try:
        return TrainConfig.from_dict(copy.deepcopy(cfg["trainer"]))
    except TypeError as exc:
        raise ConfigurationError(f"trainer: {exc}") from None


def dump(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


def git_blob_hash(data: bytes) -> str:
    """SHA-1 over ``blob <size>\\0<data>``, the object id git would assign."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def hash_inputs(paths) -> dict:
    """Per-file blob hashes plus one combined hash over the sorted listing."""
    files = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for child in sorted(p.rglob("*")):
                if child.is_file():
                    files[str(child)] = git_blob_hash(child.read_bytes())
        elif p.is_file():
            files[str(p)] = git_blob_hash(p.read_bytes())
    listing = "".join(f"{h}  {name}\n" for name, h in sorted(files.items()))
    return {"files": files, "combined": git_blob_hash(listing.encode())}
