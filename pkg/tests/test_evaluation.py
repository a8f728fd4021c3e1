import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from astrec import evaluation, models, synth
from astrec.data import Interactions
from astrec.errors import ConfigurationError, DiagnosticError, UnsupportedInputError, ValidationError
from astrec.evaluation import ANY_HIT, RECALL
from astrec.numcore import Rng


def item_score_model(scores, n_users=4):
    """MF model whose logit for (u, i) is scores[i] for every user."""
    scores = np.asarray(scores, dtype=np.float64)
    m = models.init(models.MF, n_users, scores.size, 1, 0.0, Rng(0))
    m.params["user_emb"][:] = 1.0
    m.params["item_emb"][:, 0] = scores
    return m


def brute_metrics(items, labels, scores, k):
    """Exhaustive oracle: the one permutation obeying the ranking rule, ideal DCG by max."""
    cands = list(range(len(items)))
    chosen = None
    for perm in itertools.permutations(cands):
        ok = all((scores[a] > scores[b]) or (scores[a] == scores[b] and items[a] < items[b])
                 for a, b in zip(perm, perm[1:]))
        if ok:
            chosen = perm
            break

    def dcg(perm):
        total = 0.0
        for j, idx in enumerate(perm[:k], start=1):
            if labels[idx]:
                total += 1 / math.log2(j + 1)
        return total

    ideal = max(dcg(p) for p in itertools.permutations(cands))
    n_rel = sum(labels)
    hits = sum(labels[idx] for idx in chosen[:k])
    return dcg(chosen) / ideal, hits / n_rel, float(hits > 0)


def test_ndcg_examples():
    assert evaluation.ndcg_at_k([1, 0, 0, 0, 0], 5) == 1.0
    assert evaluation.ndcg_at_k([0, 1, 0, 0, 0], 5) == pytest.approx(1 / math.log2(3), abs=1e-15)
    assert evaluation.ndcg_at_k([1, 1], 5) == 1.0
    with pytest.raises(ConfigurationError):
        evaluation.ndcg_at_k([1], 0)


def test_hr_examples():
    assert evaluation.hr_at_k([1, 0, 0, 0, 0], 1, 5, RECALL) == 1.0
    assert evaluation.hr_at_k([1, 0, 0, 0, 0], 4, 5, RECALL) == 0.25
    assert evaluation.hr_at_k([1, 0, 0, 0, 0], 4, 5, ANY_HIT) == 1.0
    with pytest.raises(ValidationError):
        evaluation.hr_at_k([0, 0], 0, 5)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=10), st.integers(1, 10))
def test_ndcg_range_and_perfect_iff_top(rel, k):
    v = evaluation.ndcg_at_k(rel, k)
    assert 0.0 <= v <= 1.0 + 1e-12
    n_rel = sum(rel)
    if n_rel:
        top = min(k, n_rel)
        assert (v == pytest.approx(1.0)) == (sum(rel[:top]) == top)


def test_rank_items():
    m = item_score_model([2.0, 5.0, 1.0])
    assert evaluation.rank_items(m, 0, [0, 1, 2]) == [1, 0, 2]
    assert evaluation.rank_items(m, 0, [2, 0, 1]) == [1, 0, 2]
    flat = item_score_model([0.0] * 5)
    assert evaluation.rank_items(flat, 1, [4, 2, 3, 0]) == [0, 2, 3, 4]
    assert evaluation.rank_items(m, 0, []) == []


def test_metrics_match_brute_force():
    gen = np.random.default_rng(0)
    for _ in range(300):
        n = int(gen.integers(1, 7))
        items = gen.permutation(20)[:n]
        labels = gen.integers(0, 2, size=n)
        if labels.sum() == 0:
            labels[0] = 1
        scores = gen.integers(0, 3, size=n).astype(float)
        k = int(gen.integers(1, 7))
        per = evaluation.ranking_metrics(np.zeros(n, int), items, labels, scores, k)
        nd, rec, anyh = brute_metrics(items.tolist(), labels.tolist(), scores.tolist(), k)
        assert per["ndcg"][0] == nd and per["hr_recall"][0] == rec and per["hr_anyhit"][0] == anyh


def test_evaluate_perfect_model():
    m = item_score_model([3.0, 2.0, -1.0, -2.0, 1.0])
    test = Interactions([0, 0, 0, 1, 1, 1], [0, 2, 4, 1, 3, 4], [1, 0, 1, 1, 0, 0])
    rep = evaluation.evaluate(m, test, 5, ANY_HIT)
    assert rep.ndcg_at_k == 1.0 and rep.hr_at_k == 1.0 and rep.n_users_evaluated == 2


def test_evaluate_two_user_fixture():
    m = item_score_model([4.0, 3.0, 2.0, 1.0])
    # user 0: relevant at rank 2; user 1: relevant at ranks 1 and 3
    test = Interactions([0, 0, 0, 1, 1, 1, 2], [0, 1, 2, 0, 1, 2, 3], [0, 1, 0, 1, 0, 1, 0])
    rep = evaluation.evaluate(m, test, 5)
    u0 = 1 / math.log2(3)
    u1 = (1 + 1 / math.log2(4)) / (1 + 1 / math.log2(3))
    assert rep.ndcg_at_k == pytest.approx((u0 + u1) / 2, abs=1e-15)
    assert rep.n_users_evaluated == 2 and rep.n_users_skipped == 1


def test_evaluate_empty():
    with pytest.raises(ValidationError):
        evaluation.evaluate(item_score_model([0.0]), Interactions())


def test_constant_scores_match_random_tie_average():
    # relabelling item ids uniformly at random is the same as breaking ties at random
    users = [0, 0, 0, 1, 1, 2, 2, 2]
    items = [0, 1, 2, 3, 4, 1, 3, 5]
    labels = [1, 0, 0, 0, 1, 1, 1, 0]
    flat = item_score_model([0.0] * 6, n_users=3)
    total = 0.0
    perms = list(itertools.permutations(range(6)))
    for perm in perms:
        relabelled = [perm[i] for i in items]
        total += evaluation.evaluate(flat, Interactions(users, relabelled, labels), 5).ndcg_at_k
    by_relabel = total / len(perms)
    per_user = []
    for u in range(3):
        rel = [lab for uu, lab in zip(users, labels) if uu == u]
        orders = list(itertools.permutations(rel))
        per_user.append(np.mean([evaluation.ndcg_at_k(o, 5) for o in orders]))
    assert by_relabel == pytest.approx(np.mean(per_user), abs=1e-12)


def test_a_distance_same_distribution():
    gen = np.random.default_rng(1)
    assert evaluation.a_distance(gen.normal(size=(2000, 4)), gen.normal(size=(2000, 4))) < 0.15


def test_a_distance_separable():
    gen = np.random.default_rng(2)
    assert evaluation.a_distance(gen.normal(0, 0.1, 2000), gen.normal(10, 0.1, 2000)) > 1.9


def test_a_distance_gaussian_bayes_error():
    gen = np.random.default_rng(3)
    expected = 2 * (1 - 2 * norm.cdf(-0.5))
    d = evaluation.a_distance(gen.normal(0, 1, 5000), gen.normal(1, 1, 5000))
    assert abs(d - expected) < 0.1


def test_a_distance_symmetric():
    gen = np.random.default_rng(4)
    a, b = gen.normal(0, 1, (2000, 2)), gen.normal(0.5, 1, (2000, 2))
    assert abs(evaluation.a_distance(a, b) - evaluation.a_distance(b, a)) < 0.05


def test_a_distance_quadratic_sees_spread():
    # equal means, different variances: invisible to a linear boundary
    gen = np.random.default_rng(7)
    a, b = gen.normal(0, 1, (3000, 2)), gen.normal(0, 3, (3000, 2))
    assert evaluation.a_distance(a, b) < 0.2
    assert evaluation.a_distance(a, b, quadratic=True) > 0.8


def test_a_distance_too_few():
    with pytest.raises(DiagnosticError):
        evaluation.a_distance(np.zeros(10), np.zeros(30))


def test_cond_shift():
    gen = np.random.default_rng(5)
    z, y = gen.normal(size=(50, 3)), gen.integers(0, 2, 50)
    assert evaluation.cond_shift(z, y, z, y) == 0.0
    e1 = np.array([1.0, 0.0, 0.0])
    assert evaluation.cond_shift(z, np.zeros(50), z + e1, np.zeros(50)) == pytest.approx(1.0)
    perm = gen.permutation(50)
    assert evaluation.cond_shift(z[perm], y[perm], z + e1, y) == pytest.approx(
        evaluation.cond_shift(z, y, z + e1, y), abs=1e-12)


def test_kl_estimate_zero_critic():
    m = models.init(models.MF, 5, 5, 3, 0.0, Rng(0))
    for n in m.names(models.THETA):
        m.params[n][...] = 0.0
    assert evaluation.kl_estimate(m, [0, 1], [1, 2], [3, 4], [0, 0]) == 0.0


def test_fit_critic_matched_distributions():
    z = np.random.default_rng(6).normal(size=(4000, 2))
    m = models.init(models.MF, 1, 1, 2, 0.0, Rng(0))
    evaluation.fit_critic(m, z, z, 500, 0.01, 256)
    assert abs(evaluation.kl_estimate_z(m, z, z)) < 0.05


def test_labeling_distance():
    w0 = synth.build_world(synth.SynthConfig(n_users=100, n_items=80, lambda_conf=0.0))
    assert evaluation.labeling_distance(w0, 50, 20_000) < 0.01
    w3 = synth.build_world(synth.SynthConfig(n_users=100, n_items=80, lambda_conf=0.3))
    w9 = synth.build_world(synth.SynthConfig(n_users=100, n_items=80, lambda_conf=0.9))
    d3 = evaluation.labeling_distance_branches(w3, 50, 20_000)
    d9 = evaluation.labeling_distance_branches(w9, 50, 20_000)
    assert d9["Q"] > d3["Q"]
    assert all(0.0 <= v <= 1.0 for v in d9.values())
    assert d9["min"] == min(d9["P"], d9["Q"])


def test_labeling_distance_needs_world():
    with pytest.raises(UnsupportedInputError):
        evaluation.labeling_distance(object())


def test_diagnose_keys():
    w = synth.build_world(synth.SynthConfig(n_users=60, n_items=40, target_density=0.2,
                                            uniform_test_pairs=800))
    ds = synth.build_dataset(w)
    m = models.init(models.MF, 60, 40, 4, 0.0, Rng(0))
    out = evaluation.diagnose(m, ds, w, n_samples=200, mc_draws=2000)
    assert set(out) == {"a_distance", "a_distance_quad", "kl_estimate", "cond_shift",
                        "labeling_distance"}
    assert 0.0 <= out["a_distance"] <= 2.0 and 0.0 <= out["a_distance_quad"] <= 2.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_ranking_metrics_ranges(seed):
    gen = np.random.default_rng(seed)
    n = 40
    per = evaluation.ranking_metrics(gen.integers(0, 5, n), gen.integers(0, 30, n),
                                     gen.integers(0, 2, n), gen.normal(size=n), 5)
    for key in ("ndcg", "hr_recall", "hr_anyhit"):
        assert np.all((per[key] >= 0) & (per[key] <= 1 + 1e-12))
