"""Explicit-feedback ingestion, binarisation and uniform-data splitting.

Interactions are stored column-wise (``Interactions``) because every consumer
downstream works on whole batches; ``Interaction`` is the single-record view.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ConfigurationError, ParseError, ValidationError
from .numcore import Rng

LOGGED = 0
UNIFORM = 1
SOURCE_NAMES = {LOGGED: "Logged", UNIFORM: "Uniform"}
NO_RATING = 0
DEFAULT_THRESHOLD = 3
DEFAULT_FRACTIONS = (0.05, 0.05, 0.90)
SPLIT_NAMES = ("biased_train", "uniform_train", "validation", "test")


class Interaction(NamedTuple):
    user: int
    item: int
    label: int
    raw_rating: int | None = None
    source: int = LOGGED


class Interactions:
    """Column store of (user, item, label, raw_rating, source) records."""

    __slots__ = ("users", "items", "labels", "ratings", "sources")

    def __init__(self, users=(), items=(), labels=(), ratings=None, sources=LOGGED):
        self.users = np.asarray(users, dtype=np.int64).reshape(-1)
        self.items = np.asarray(items, dtype=np.int64).reshape(-1)
        self.labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        n = self.users.size
        if ratings is None:
            ratings = np.full(n, NO_RATING, dtype=np.int64)
        self.ratings = np.asarray(ratings, dtype=np.int64).reshape(-1)
        self.sources = np.broadcast_to(np.asarray(sources, dtype=np.int8), (n,)).copy()
        if not (self.items.size == self.labels.size == self.ratings.size == n):
            raise ValidationError("interaction columns have different lengths")

    @classmethod
    def from_records(cls, records) -> "Interactions":
        records = list(records)
        if not records:
            return cls()
        cols = list(zip(*[(r.user, r.item, r.label,
                           NO_RATING if r.raw_rating is None else r.raw_rating, r.source)
                          for r in records]))
        return cls(cols[0], cols[1], cols[2], cols[3], cols[4])

    def __len__(self):
        return int(self.users.size)

    def __iter__(self) -> Iterator[Interaction]:
        for u, i, y, r, s in zip(self.users.tolist(), self.items.tolist(), self.labels.tolist(),
                                 self.ratings.tolist(), self.sources.tolist()):
            yield Interaction(u, i, y, None if r == NO_RATING else r, s)

    def __getitem__(self, idx) -> "Interactions":
        if isinstance(idx, (int, np.integer)):
            idx = [idx]
        return Interactions(self.users[idx], self.items[idx], self.labels[idx],
                            self.ratings[idx], self.sources[idx])

    def __eq__(self, other):
        if not isinstance(other, Interactions):
            return NotImplemented
        return all(np.array_equal(getattr(self, a), getattr(other, a)) for a in self.__slots__)

    def __repr__(self):
        return f"Interactions(n={len(self)})"

    def pairs(self) -> np.ndarray:
        return np.stack([self.users, self.items], axis=1)

    def pair_keys(self, n_items: int) -> np.ndarray:
        return self.users * int(n_items) + self.items

    def with_source(self, source: int) -> "Interactions":
        return Interactions(self.users, self.items, self.labels, self.ratings, source)

    @staticmethod
    def concat(parts) -> "Interactions":
        parts = [p for p in parts if len(p)]
        if not parts:
            return Interactions()
        return Interactions(*(np.concatenate([getattr(p, a) for p in parts])
                              for a in Interactions.__slots__))


@dataclass
class IdMap:
    """Raw id -> dense 0-based id, assigned in order of first appearance."""

    forward: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.forward)

    def get(self, raw: int) -> int:
        dense = self.forward.get(raw)
        if dense is None:
            dense = self.forward[raw] = len(self.forward)
        return dense

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for raw, dense in self.forward.items():
                fh.write(f"{raw}\t{dense}\n")

    @classmethod
    def read(cls, path) -> "IdMap":
        forward = {}
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ParseError("expected raw_id<TAB>dense_id", n)
                forward[int(parts[0])] = int(parts[1])
        return cls(forward)


def binarize(rating: int, threshold: int = DEFAULT_THRESHOLD) -> int:
    if not 1 <= rating <= 5:
        raise ValidationError(f"rating {rating} outside 1-5")
    return int(rating >= threshold)


def load_triples(path, separator: str = "\t", one_based: bool = False,
                 threshold: int = DEFAULT_THRESHOLD, source: int = LOGGED, binary: bool = False,
                 remap: bool = False, user_map: IdMap | None = None,
                 item_map: IdMap | None = None):
    """Parse a ``user<sep>item<sep>rating`` file.

    Returns ``(interactions, n_users, n_items)``. With ``binary=True`` the
    third column is already a 0/1 label. With ``remap=True`` ids go through
    ``user_map``/``item_map`` (created if absent, shared across files when
    passed in) and the universe sizes are the map sizes; otherwise ids are
    used as given and the sizes are ``max id + 1``.
    """
    sep = None if separator in (" ", None) else separator
    users, items, labels, ratings = [], [], [], []
    if remap:
        user_map = user_map if user_map is not None else IdMap()
        item_map = item_map if item_map is not None else IdMap()
    shift = 1 if one_based else 0
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split(sep)
            if len(parts) != 3:
                raise ParseError(f"expected 3 fields, got {len(parts)}", n)
            try:
                u, i, r = (int(p) for p in parts)
            except ValueError:
                raise ParseError(f"non-integer field in {line.strip()!r}", n) from None
            u, i = u - shift, i - shift
            if remap:
                u, i = user_map.get(u), item_map.get(i)
            elif u < 0 or i < 0:
                raise ValidationError(f"line {n}: negative id")
            if binary:
                if r not in (0, 1):
                    raise ValidationError(f"line {n}: label {r} is not 0/1")
                labels.append(r)
                ratings.append(NO_RATING)
            else:
                if not 1 <= r <= 5:
                    raise ValidationError(f"line {n}: rating {r} outside 1-5")
                labels.append(int(r >= threshold))
                ratings.append(r)
            users.append(u)
            items.append(i)
    inter = Interactions(users, items, labels, ratings, source)
    if remap:
        return inter, len(user_map), len(item_map)
    n_users = int(inter.users.max()) + 1 if len(inter) else 0
    n_items = int(inter.items.max()) + 1 if len(inter) else 0
    return inter, n_users, n_items


def write_triples(interactions: Interactions, path, separator: str = "\t",
                  one_based: bool = False):
    """Inverse of ``load_triples``: ratings when present, otherwise 0/1 labels."""
    shift = 1 if one_based else 0
    has_ratings = bool(len(interactions)) and bool(np.all(interactions.ratings != NO_RATING))
    third = interactions.ratings if has_ratings else interactions.labels
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for u, i, r in zip(interactions.users.tolist(), interactions.items.tolist(), third.tolist()):
            fh.write(f"{u + shift}{separator}{i + shift}{separator}{r}\n")
    return has_ratings


def load_matrix_ascii(path, threshold: int = DEFAULT_THRESHOLD, source: int = LOGGED):
    """Dense whitespace-separated rating matrix, 0 = unobserved."""
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = [int(x) for x in line.split()]
            except ValueError:
                raise ParseError(f"non-integer entry in row {len(rows)}", n) from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"ragged matrix: row {len(rows)} has {len(row)} entries, "
                                 f"expected {width}", n)
            rows.append(row)
    if not rows:
        return Interactions(), 0, 0
    mat = np.asarray(rows, dtype=np.int64)
    bad = (mat != 0) & ((mat < 1) | (mat > 5))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ValidationError(f"rating {mat[r, c]} at row {r}, column {c} outside 1-5")
    users, items = np.nonzero(mat)
    ratings = mat[users, items]
    labels = (ratings >= threshold).astype(np.int64)
    return Interactions(users, items, labels, ratings, source), mat.shape[0], mat.shape[1]


def split_uniform(uniform: Interactions, fractions=DEFAULT_FRACTIONS, rng: Rng | None = None):
    """Random partition into (uniform_train, validation, test).

    Part sizes are floored; the remainder goes to test. Records keep their
    original relative order inside each part.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or min(fractions) < 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError(f"split fractions must be 3 nonnegative values summing to 1, "
                                 f"got {fractions}")
    n = len(uniform)
    if n == 0:
        return Interactions(), Interactions(), Interactions()
    rng = rng if rng is not None else Rng(0)
    perm = rng.permutation(n)
    n_train = math.floor(fractions[0] * n + 1e-9)
    n_val = math.floor(fractions[1] * n + 1e-9)
    parts = (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])
    return tuple(uniform[np.sort(p)] for p in parts)


def drop_negatives(interactions: Interactions) -> Interactions:
    return interactions[np.flatnonzero(interactions.labels == 1)]


def sample_negatives(positives: Interactions, n_items: int, neg_ratio: int, rng: Rng,
                     observed: Interactions | None = None) -> Interactions:
    """Label-0 examples for implicit-feedback training.

    For each positive, ``neg_ratio`` items drawn uniformly among those the
    user has no observed record for (rejection sampling).
    """
    observed = positives if observed is None else observed
    seen = set(observed.pair_keys(n_items).tolist())
    users = np.repeat(positives.users, neg_ratio)
    items = rng.integers(n_items, size=users.size)
    keys = users * n_items + items
    for _ in range(100):
        clash = np.fromiter((k in seen for k in keys.tolist()), dtype=bool, count=keys.size)
        if not clash.any():
            break
        items[clash] = rng.integers(n_items, size=int(clash.sum()))
        keys = users * n_items + items
    return Interactions(users, items, np.zeros(users.size, dtype=np.int64), None, LOGGED)


@dataclass
class Dataset:
    n_users: int
    n_items: int
    biased_train: Interactions
    uniform_train: Interactions = field(default_factory=Interactions)
    validation: Interactions = field(default_factory=Interactions)
    test: Interactions = field(default_factory=Interactions)
    user_map: IdMap | None = None
    item_map: IdMap | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in SPLIT_NAMES:
            part = getattr(self, name)
            if not len(part):
                continue
            if part.users.min() < 0 or part.users.max() >= self.n_users:
                raise ValidationError(f"{name}: user id out of range [0, {self.n_users})")
            if part.items.min() < 0 or part.items.max() >= self.n_items:
                raise ValidationError(f"{name}: item id out of range [0, {self.n_items})")
        self.biased_train = self.biased_train.with_source(LOGGED)
        for name in SPLIT_NAMES[1:]:
            setattr(self, name, getattr(self, name).with_source(UNIFORM))

    def training_pool(self) -> Interactions:
        """D = D_P plus the labeled uniform data, when there is any."""
        return Interactions.concat([self.biased_train, self.uniform_train])

    def sizes(self) -> dict:
        return {name: len(getattr(self, name)) for name in SPLIT_NAMES}

    def save(self, directory, separator: str = "\t"):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        binary = {}
        for name in SPLIT_NAMES:
            binary[name] = not write_triples(getattr(self, name), directory / f"{name}.tsv",
                                             separator)
        meta = {"n_users": self.n_users, "n_items": self.n_items, "separator": separator,
                "binary": binary, "sizes": self.sizes()}
        if self.user_map is not None:
            self.user_map.write(directory / "user_ids.tsv")
        if self.item_map is not None:
            self.item_map.write(directory / "item_ids.tsv")
        (directory / "dataset.json").write_text(json.dumps(meta, indent=2) + "\n")

    @classmethod
    def load(cls, directory) -> "Dataset":
        directory = Path(directory)
        meta_path = directory / "dataset.json"
        if not meta_path.exists():
            raise FileNotFoundError(f"dataset description not found: {meta_path}")
        meta = json.loads(meta_path.read_text())
        parts = {}
        for name in SPLIT_NAMES:
            path = directory / f"{name}.tsv"
            if path.exists():
                source = LOGGED if name == "biased_train" else UNIFORM
                parts[name] = load_triples(path, meta.get("separator", "\t"), source=source,
                                           binary=meta["binary"].get(name, True))[0]
            else:
                parts[name] = Interactions()
        maps = {}
        for key, fname in (("user_map", "user_ids.tsv"), ("item_map", "item_ids.tsv")):
            if (directory / fname).exists():
                maps[key] = IdMap.read(directory / fname)
        return cls(meta["n_users"], meta["n_items"], **parts, **maps)
