import math

import numpy as np
import pytest

from astrec import evaluation, models, synth, trainer
from astrec.errors import ConfigurationError, TrainingError
from astrec.losses import LossWeights
from astrec.numcore import Rng
from astrec.trainer import TrainConfig


@pytest.fixture(scope="module")
def small():
    cfg = synth.SynthConfig(n_users=80, n_items=60, k=2, target_density=0.1,
                            uniform_test_pairs=2000, seed=1)
    return synth.build_dataset(synth.build_world(cfg))


def _cfg(**kw):
    base = dict(max_steps=60, eval_every=20, batch_size_D=64, batch_size_Q=64, k=4,
                teacher_refresh=10, patience=10)
    base.update(kw)
    return TrainConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(max_steps=0)
    with pytest.raises(ConfigurationError):
        TrainConfig(objective="Nope")
    with pytest.raises(ConfigurationError):
        TrainConfig(lr=-1)
    with pytest.raises(ConfigurationError):
        TrainConfig.from_dict({"bogus": 1})
    assert TrainConfig.from_dict(TrainConfig(lr=0.01).to_dict()).lr == 0.01


def test_zero_lr_leaves_model_unchanged(small):
    cfg = _cfg(objective="Biased", max_steps=1, lr=0.0)
    res = trainer.train(small, cfg)
    init = models.init(cfg.variant, small.n_users, small.n_items, cfg.k, cfg.dropout_rate,
                       Rng(cfg.seed, trainer.STREAM_INIT), cfg.critic_width, cfg.seed)
    assert all(np.array_equal(init.params[n], res.final_model.params[n]) for n in init.params)
    assert res.history[0]["val_ndcg5"] == evaluation.evaluate(init, small.validation).ndcg_at_k


@pytest.mark.parametrize("variant", [models.MF, models.NCF])
def test_ast_without_extras_matches_biased(small, variant):
    w = LossWeights(alpha=0, beta=0, gamma=0)
    seen = {}

    def recorder(label):
        seen[label] = []
        return lambda step, m, t: seen[label].append({n: p.copy() for n, p in m.params.items()})

    a = trainer.train(small, _cfg(objective="AST", weights=w, variant=variant), callback=recorder("a"))
    b = trainer.train(small, _cfg(objective="Biased", variant=variant), callback=recorder("b"))
    for pa, pb in zip(seen["a"], seen["b"]):
        assert all(np.array_equal(pa[n], pb[n]) for n in pa)
    assert a.history == b.history


def test_deterministic(small):
    a = trainer.train(small, _cfg())
    b = trainer.train(small, _cfg())
    assert a.history == b.history
    assert all(np.array_equal(a.best_model.params[n], b.best_model.params[n]) for n in a.best_model.params)


def test_history_and_best(small):
    res = trainer.train(small, _cfg(max_steps=100))
    steps = [r["step"] for r in res.history]
    assert steps == sorted(set(steps)) and steps[-1] == 100
    vals = [r["val_ndcg5"] for r in res.history]
    assert res.best_val_ndcg == max(vals)
    assert evaluation.evaluate(res.best_model, small.validation).ndcg_at_k == max(vals)
    assert res.history[steps.index(res.best_step)]["val_ndcg5"] == max(vals)
    assert all(r["loss_S"] > 0 for r in res.history)


def test_early_stop(small):
    res = trainer.train(small, _cfg(max_steps=2000, eval_every=5, patience=1, lr=0.05))
    assert res.stop_reason == trainer.EARLY_STOP
    assert res.history[-1]["step"] < 2000


def test_teacher_frozen_between_refreshes(small):
    record = {}

    def cb(step, model, teacher):
        if step % 10 == 1:
            record["snap"] = {n: p.copy() for n, p in teacher.params.items()}
            record["id"] = id(teacher)
        else:
            assert id(teacher) == record["id"]
            assert all(np.array_equal(teacher.params[n], record["snap"][n]) for n in record["snap"])
            assert not np.array_equal(teacher.params["user_emb"], model.params["user_emb"])

    trainer.train(small, _cfg(max_steps=40), callback=cb)


def test_refresh_every_step(small):
    ids = set()
    trainer.train(small, _cfg(max_steps=5, teacher_refresh=1),
                  callback=lambda s, m, t: ids.add(id(t)))
    assert len(ids) == 5


def test_critic_ascent_nondecreasing(small):
    m = models.init(models.MF, small.n_users, small.n_items, 4, 0.0, Rng(0))
    rng = Rng(2)
    m.params["user_emb"] = rng.normal(m.params["user_emb"].shape)
    m.params["item_emb"] = rng.normal(m.params["item_emb"].shape)
    bt = small.biased_train[np.arange(256)]
    z_p = models.forward(m, bt.users, bt.items).z
    z_q = models.forward(m, rng.integers(small.n_users, size=256), rng.integers(small.n_items, size=256)).z
    hist = evaluation.fit_critic(m, z_p, z_q, steps=500, lr=0.001)
    assert all(b >= a - 1e-12 for a, b in zip(hist, hist[1:]))
    assert hist[-1] > hist[0]


def test_non_finite_loss_reports_step(small, monkeypatch):
    real = trainer.loss_biased_erm
    calls = {"n": 0}

    def fake(*args, **kw):
        calls["n"] += 1
        v, d, tr = real(*args, **kw)
        return (float("nan") if calls["n"] == 3 else v), d, tr

    monkeypatch.setattr(trainer, "loss_biased_erm", fake)
    with pytest.raises(TrainingError) as info:
        trainer.train(small, _cfg(objective="Biased"))
    assert info.value.step == 3 and info.value.component == "D"


@pytest.mark.parametrize("objective", ["IPS", "MultiTask"])
def test_baselines_run(small, objective):
    res = trainer.train(small, _cfg(objective=objective))
    assert not math.isnan(res.best_val_ndcg)


def test_implicit_mode(small):
    res = trainer.train(small, _cfg(objective="Biased", implicit=True))
    assert res.history


def test_ablate(small):
    assert [label for label, _ in trainer.ablate(small, _cfg(max_steps=20), [])] == ["AST"]
    runs = trainer.ablate(small, _cfg(max_steps=20), ["E", "A"])
    assert [label for label, _ in runs] == ["AST", "AST w/o A", "AST w/o E"]
    cfg_a = runs[1][1].config
    assert cfg_a.weights.alpha == 0 and cfg_a.weights.beta == 0.4 and cfg_a.weights.gamma == 0.4
    with pytest.raises(ConfigurationError):
        trainer.ablate(small, _cfg(), ["Z"])


def test_history_csv(small, tmp_path):
    import csv
    res = trainer.train(small, _cfg())
    res.write_history_csv(tmp_path / "h.csv")
    with open(tmp_path / "h.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == list(trainer.HISTORY_COLUMNS)
    assert [float(r["val_ndcg5"]) for r in rows] == [r["val_ndcg5"] for r in res.history]
