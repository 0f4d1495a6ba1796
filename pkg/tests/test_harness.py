import numpy as np
import pytest

from blackbox_ranking import InvalidInputError, MemoryBuffer
from blackbox_ranking.harness import (
    MAP_APC_WEIGHTS,
    Adam,
    EmbeddingModel,
    LossKind,
    SynthParams,
    TrainConfig,
    batch_loss,
    batch_loss_surrogate,
    collapse_experiment,
    evaluate,
    generate,
    normalize,
    similarity_scores,
    split,
    train,
)


def small_batch(seed=0, classes=4, per_class=2, dim=6):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(classes * per_class, dim))
    ids = np.repeat(np.arange(classes), per_class)
    return x, ids, rng


def weight_fd(f, w, h=1e-6):
    out = np.empty_like(w)
    for idx in np.ndindex(*w.shape):
        e = np.zeros_like(w)
        e[idx] = h
        out[idx] = (f(w + e) - f(w - e)) / (2 * h)
    return out


class TestData:
    def test_zero_spread_collapses_classes(self):
        ds = generate(SynthParams(num_classes=2, per_class=4, input_dim=8, cluster_spread=0.0, seed=0))
        for c in (0, 1):
            pts = ds.points[ds.class_ids == c]
            assert np.all(pts == pts[0])

    def test_deterministic(self):
        a = generate(SynthParams(seed=3))
        b = generate(SynthParams(seed=3))
        assert a.points.tobytes() == b.points.tobytes()

    def test_split_keeps_every_class(self):
        ds = generate(SynthParams(num_classes=5, per_class=8))
        tr, ev = split(ds, 0.25)
        assert len(tr) + len(ev) == len(ds)
        for part in (tr, ev):
            assert set(np.unique(part.class_ids)) == set(range(5))

    def test_per_class_minimum(self):
        with pytest.raises(InvalidInputError):
            generate(SynthParams(per_class=1))


class TestSimilarity:
    def test_identical_embeddings(self):
        model = EmbeddingModel(np.eye(3))
        x = np.tile([1.0, 2.0, 3.0], (4, 1))
        scores, labels, _ = similarity_scores(model, x, [0, 0, 1, 1])
        np.testing.assert_allclose(scores, 1.0)

    def test_orthogonal_embeddings(self):
        model = EmbeddingModel(np.eye(3))
        x = np.array([[1.0, 0, 0], [2.0, 0, 0], [0, 1.0, 0]])
        scores, labels, _ = similarity_scores(model, x, [0, 0, 1])
        np.testing.assert_allclose(scores[2], [0.0, 0.0], atol=1e-15)
        np.testing.assert_array_equal(labels[0], [True, False])

    def test_self_pair_excluded_with_memory(self):
        x, ids, rng = small_batch()
        model = EmbeddingModel(rng.normal(size=(6, 3)))
        mem = MemoryBuffer(2)
        mem.commit(model.embed(x[:5]), ids[:5])
        scores, labels, current = similarity_scores(model, x, ids, mem)
        assert scores.shape == (8, 8 - 1 + 5)
        np.testing.assert_array_equal(current.sum(axis=1), 7)

    def test_batch_of_one(self):
        with pytest.raises(InvalidInputError):
            similarity_scores(EmbeddingModel(np.eye(2)), np.ones((1, 2)), [0])

    def test_normalize_unit_norm(self):
        u = np.random.default_rng(0).normal(size=(50, 7))
        np.testing.assert_allclose(np.linalg.norm(normalize(u), axis=1), 1.0, atol=1e-9)


class TestGradient:
    @pytest.mark.parametrize("kind", list(LossKind))
    @pytest.mark.parametrize("with_memory", [False, True])
    def test_weight_gradient_matches_finite_differences(self, kind, with_memory):
        x, ids, rng = small_batch(seed=1)
        w = rng.normal(size=(6, 3))
        config = TrainConfig(loss=kind, alpha=0.05, lam=2.0, batch_size=8, samples_per_class=2)
        mem = None
        if with_memory:
            mem = MemoryBuffer(1)
            x_old, ids_old, _ = small_batch(seed=2)
            mem.commit(normalize(x_old @ rng.normal(size=(6, 3))), ids_old)
        value, grad, _ = batch_loss(w, x, ids, config, mem)
        fd = weight_fd(lambda v: batch_loss_surrogate(v, x, ids, config, mem, frozen_weight=w), w)
        assert np.linalg.norm(grad) > 0
        assert np.linalg.norm(grad - fd) <= 1e-4 * np.linalg.norm(grad)

    def test_zero_memory_is_bitwise_memoryless(self):
        x, ids, rng = small_batch(seed=3)
        w = rng.normal(size=(6, 3))
        config = TrainConfig(batch_size=8, samples_per_class=2)
        mem = MemoryBuffer(0)
        mem.commit(normalize(x @ w), ids)
        a = batch_loss(w, x, ids, config, None)
        b = batch_loss(w, x, ids, config, mem)
        assert a[0] == b[0]
        assert a[1].tobytes() == b[1].tobytes()

    def test_map_plus_apc_weights(self):
        assert sum(MAP_APC_WEIGHTS) == pytest.approx(1.0)


class TestAdam:
    def test_minimises_quadratic(self):
        opt = Adam((3,), 0.1)
        p = np.array([3.0, -2.0, 1.0])
        for _ in range(500):
            p = opt.step(p, 2 * p)
        np.testing.assert_allclose(p, 0.0, atol=1e-2)

    def test_first_step_size(self):
        # bias correction makes the first update lr * sign(grad)
        p = Adam((2,), 0.5).step(np.zeros(2), np.array([3.0, -0.01]))
        np.testing.assert_allclose(p, [-0.5, 0.5], rtol=1e-6)


class TestEvaluate:
    def test_perfect_model(self):
        ds = generate(SynthParams(num_classes=4, per_class=4, input_dim=4, cluster_spread=0.0))
        m = evaluate(EmbeddingModel(np.eye(4)), ds)
        assert m == {"r_at_1": 1.0, "r_at_4": 1.0, "map": 1.0}

    def test_recall_monotone_in_k(self):
        ds = generate(SynthParams(num_classes=6, per_class=6, input_dim=8, cluster_spread=1.0))
        model = EmbeddingModel.random(8, 4, np.random.default_rng(0))
        m = evaluate(model, ds, ks=(1, 2, 4, 8))
        values = [m[f"r_at_{k}"] for k in (1, 2, 4, 8)]
        assert values == sorted(values)
        assert all(0 <= v <= 1 for v in values + [m["map"]])

    def test_collapsed_model_hits_class_prior(self):
        # all embeddings equal, so every query ranks the lowest-index other item first
        ds = generate(SynthParams(num_classes=4, per_class=8, input_dim=4))
        const = type(ds)(np.ones_like(ds.points), ds.class_ids, ds.params)
        m = evaluate(EmbeddingModel(np.eye(4)), const)
        assert m["r_at_1"] == 0.25


class TestTrain:
    def test_deterministic(self):
        ds = generate(SynthParams(num_classes=8, per_class=12, input_dim=8))
        config = TrainConfig(steps=30, eval_every=10, batch_size=16, embed_dim=4)
        a = train(config, ds).history
        b = train(config, ds).history
        assert a == b

    def test_zero_spread_reaches_perfect_recall(self):
        ds = generate(SynthParams(cluster_spread=0.0))
        result = train(TrainConfig(steps=100), ds)
        assert max(row.r_at_1 for row in result.history) == 1.0

    def test_history_layout(self):
        ds = generate(SynthParams(num_classes=8, per_class=12, input_dim=8))
        result = train(TrainConfig(steps=25, eval_every=10, batch_size=16, embed_dim=4), ds)
        assert [row.step for row in result.history] == [0, 10, 20, 25]
        assert result.best.r_at_1 == max(row.r_at_1 for row in result.history)

    def test_config_validation(self):
        with pytest.raises(InvalidInputError):
            TrainConfig(batch_size=10, samples_per_class=4)
        with pytest.raises(InvalidInputError):
            TrainConfig(lam=0.0)


class TestCollapse:
    def test_margin_escapes_near_tie(self):
        plain, margin = collapse_experiment()
        assert not plain.escaped
        assert margin.escaped
        assert margin.result.history[-1].r_at_1 > plain.result.history[-1].r_at_1
