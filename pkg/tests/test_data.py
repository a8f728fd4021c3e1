import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from astrec.data import (LOGGED, UNIFORM, Dataset, IdMap, Interactions, binarize,
                         drop_negatives, load_matrix_ascii, load_triples, sample_negatives,
                         split_uniform, write_triples)
from astrec.errors import ConfigurationError, ParseError, ValidationError
from astrec.numcore import Rng


def _write(tmp_path, text, name="f.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_triples_binarizes(tmp_path):
    p = _write(tmp_path, "1 1 5\n2 1 2\n")
    inter, nu, ni = load_triples(p, " ", one_based=True)
    assert inter.labels.tolist() == [1, 0]
    assert inter.users.tolist() == [0, 1] and inter.items.tolist() == [0, 0]
    assert (nu, ni) == (2, 1)


def test_load_triples_empty(tmp_path):
    inter, nu, ni = load_triples(_write(tmp_path, ""))
    assert len(inter) == 0 and (nu, ni) == (0, 0)


def test_load_triples_parse_error_names_line(tmp_path):
    with pytest.raises(ParseError) as info:
        load_triples(_write(tmp_path, "1 x 3\n"), " ")
    assert info.value.line == 1
    assert "line 1" in str(info.value)


def test_load_triples_wrong_field_count(tmp_path):
    with pytest.raises(ParseError) as info:
        load_triples(_write(tmp_path, "0\t0\t3\n0\t1\n"))
    assert info.value.line == 2


def test_load_triples_rating_out_of_range(tmp_path):
    with pytest.raises(ValidationError):
        load_triples(_write(tmp_path, "0\t0\t6\n"))


def test_load_triples_remap_shares_maps(tmp_path):
    a = _write(tmp_path, "10\t7\t4\n30\t7\t1\n", "a.tsv")
    b = _write(tmp_path, "30\t9\t5\n", "b.tsv")
    um, im = IdMap(), IdMap()
    ia, _, _ = load_triples(a, remap=True, user_map=um, item_map=im)
    ib, nu, ni = load_triples(b, remap=True, user_map=um, item_map=im)
    assert ia.users.tolist() == [0, 1] and ib.users.tolist() == [1]
    assert ib.items.tolist() == [1]
    assert (nu, ni) == (2, 2)


def test_idmap_roundtrip(tmp_path):
    m = IdMap()
    for raw in (42, 7, 42, 100):
        m.get(raw)
    m.write(tmp_path / "ids.tsv")
    assert IdMap.read(tmp_path / "ids.tsv").forward == {42: 0, 7: 1, 100: 2}


def test_load_matrix_ascii(tmp_path):
    inter, nu, ni = load_matrix_ascii(_write(tmp_path, "5 0\n0 1\n"))
    assert list(zip(inter.users.tolist(), inter.items.tolist(), inter.labels.tolist())) == \
        [(0, 0, 1), (1, 1, 0)]
    assert (nu, ni) == (2, 2)


def test_load_matrix_all_zero(tmp_path):
    inter, nu, ni = load_matrix_ascii(_write(tmp_path, "0 0 0\n0 0 0\n"))
    assert len(inter) == 0 and (nu, ni) == (2, 3)


def test_load_matrix_ragged(tmp_path):
    with pytest.raises(ParseError) as info:
        load_matrix_ascii(_write(tmp_path, "1 2 3\n4 5\n"))
    assert "row 1" in str(info.value)


@given(st.lists(st.lists(st.integers(0, 5), min_size=4, max_size=4), min_size=1, max_size=6))
@settings(max_examples=40, deadline=None)
def test_load_matrix_count_oracle(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("m") / "m.txt"
    path.write_text("\n".join(" ".join(map(str, r)) for r in rows) + "\n")
    inter, _, _ = load_matrix_ascii(path)
    nonzero = sum(1 for r in rows for x in r if x != 0)
    assert len(inter) == nonzero


@pytest.mark.parametrize("rating, threshold, label", [(3, 3, 1), (2, 3, 0), (5, 6, 0)])
def test_binarize(rating, threshold, label):
    assert binarize(rating, threshold) == label


def test_binarize_out_of_range():
    with pytest.raises(ValidationError):
        binarize(0)


@given(st.integers(1, 6))
def test_binarize_monotone(threshold):
    labels = [binarize(r, threshold) for r in range(1, 6)]
    assert labels == sorted(labels)


def _inter(n):
    idx = np.arange(n)
    return Interactions(idx % 17, idx // 17, idx % 2, None, UNIFORM)


def test_split_sizes():
    parts = split_uniform(_inter(100), (0.05, 0.05, 0.90), Rng(0))
    assert tuple(len(p) for p in parts) == (5, 5, 90)


def test_split_all_test():
    train, val, test = split_uniform(_inter(30), (0, 0, 1), Rng(0))
    assert len(train) == len(val) == 0 and test == _inter(30)


def test_split_deterministic():
    a = split_uniform(_inter(50), rng=Rng(3))
    b = split_uniform(_inter(50), rng=Rng(3))
    assert all(x == y for x, y in zip(a, b))


def test_split_empty():
    assert all(len(p) == 0 for p in split_uniform(Interactions()))


def test_split_bad_fractions():
    with pytest.raises(ConfigurationError):
        split_uniform(_inter(10), (0.5, 0.6, 0.1))


@given(st.integers(0, 300), st.integers(0, 2**32), st.floats(0, 0.5), st.floats(0, 0.5))
@settings(max_examples=60, deadline=None)
def test_split_is_partition(n, seed, f1, f2):
    inter = _inter(n)
    parts = split_uniform(inter, (f1, f2, 1.0 - f1 - f2), Rng(seed))
    keys = np.concatenate([p.pair_keys(1000) for p in parts])
    assert sorted(keys.tolist()) == sorted(inter.pair_keys(1000).tolist())
    assert len(parts[0]) == int(np.floor(f1 * n + 1e-9))


def test_drop_negatives():
    inter = Interactions([0, 0], [1, 2], [1, 0])
    out = drop_negatives(inter)
    assert out.items.tolist() == [1]


def test_drop_negatives_count_oracle():
    labels = Rng(1).integers(2, size=200)
    inter = Interactions(np.zeros(200, int), np.arange(200), labels)
    assert len(drop_negatives(inter)) == int(sum(1 for x in labels if x == 1))
    pos = drop_negatives(inter)
    assert drop_negatives(pos) == pos


def test_sample_negatives_avoid_observed():
    pos = Interactions([0, 0, 1], [0, 1, 2], [1, 1, 1])
    negs = sample_negatives(pos, 6, 4, Rng(0))
    assert len(negs) == 12 and not negs.labels.any()
    seen = set(pos.pair_keys(6).tolist())
    assert not seen & set(negs.pair_keys(6).tolist())


def test_write_load_roundtrip(tmp_path):
    inter = Interactions([0, 3, 1], [2, 0, 1], [1, 0, 1], [4, 2, 3])
    write_triples(inter, tmp_path / "t.tsv")
    back, _, _ = load_triples(tmp_path / "t.tsv")
    assert back == inter


def test_dataset_save_load(tmp_path):
    ds = Dataset(4, 3, Interactions([0, 1], [0, 2], [1, 0]),
                 Interactions([2], [1], [1]), Interactions([3], [0], [0]),
                 Interactions([0, 3], [1, 2], [1, 1]))
    assert ds.uniform_train.sources.tolist() == [UNIFORM]
    assert ds.biased_train.sources.tolist() == [LOGGED, LOGGED]
    ds.save(tmp_path / "ds")
    back = Dataset.load(tmp_path / "ds")
    for name in ("biased_train", "uniform_train", "validation", "test"):
        assert getattr(back, name) == getattr(ds, name)
    assert (back.n_users, back.n_items) == (4, 3)


def test_dataset_rejects_out_of_range():
    with pytest.raises(ValidationError):
        Dataset(2, 2, Interactions([0, 2], [0, 0], [1, 1]))
