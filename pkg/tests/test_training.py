"""The training loop: determinism, divergence handling and basic learning."""

import numpy as np
import pytest

import mhp
from mhp.datagen import temporal2d_dataset
from mhp.losses import CROSS_ENTROPY
from mhp.meta_loss import MetaLossConfig
from mhp.network import TrainingDivergedError
from mhp.training import TrainSchedule, train


def temporal_sampler(rng, n):
    return temporal2d_dataset(n, rng)


def fresh_model(m, seed=0, hidden=(16, 16), in_dim=1, out_dim=2):
    rng = np.random.default_rng(seed)
    return mhp.init_mlp(in_dim, hidden, out_dim, m, rng, seed=seed)


def run(m=2, seed=0, epochs=4, lr=0.02, n=1024, base=None, **kw):
    model = fresh_model(m, seed, **kw)
    opt = mhp.make_optimizer("sgd_momentum", model, lr, 0.9)
    cfg = MetaLossConfig(m, 0.05, 0.01, base or mhp.L2)
    sched = TrainSchedule(epochs, 32, seed, samples_per_epoch=n)
    history = train(model, temporal_sampler, cfg, opt, sched)
    return model, history


class TestDeterminism:
    def test_same_seed_same_history_and_params(self):
        m1, h1 = run(seed=5)
        m2, h2 = run(seed=5)
        for a, b in zip(h1, h2):
            assert a.mean_meta_loss == b.mean_meta_loss
            assert a.oracle_min_loss == b.oracle_min_loss
        for la, lb in zip(m1.layers, m2.layers):
            assert np.array_equal(la.weights, lb.weights)

    def test_different_seed_differs(self):
        _, h1 = run(seed=1)
        _, h2 = run(seed=2)
        assert h1[-1].mean_meta_loss != h2[-1].mean_meta_loss


class TestDivergence:
    def test_huge_lr_aborts_with_location(self):
        model = fresh_model(2)
        opt = mhp.make_optimizer("sgd_momentum", model, 1e12, 0.9)
        cfg = MetaLossConfig(2, 0.05, 0.0)
        sched = TrainSchedule(5, 32, 0, samples_per_epoch=512)
        with pytest.raises(TrainingDivergedError) as err:
            train(model, temporal_sampler, cfg, opt, sched)
        assert err.value.epoch is not None
        assert err.value.batch_index is not None

    def test_model_config_mismatch(self):
        model = fresh_model(2)
        opt = mhp.make_optimizer("sgd_momentum", model, 0.01)
        with pytest.raises(ValueError):
            train(model, temporal_sampler, MetaLossConfig(3), opt,
                  TrainSchedule(1, 32, 0))

    def test_empty_dataset_rejected(self):
        model = fresh_model(2)
        opt = mhp.make_optimizer("sgd_momentum", model, 0.01)
        with pytest.raises(ValueError):
            train(model, (np.zeros((0, 1)), np.zeros((0, 2))),
                  MetaLossConfig(2), opt, TrainSchedule(1, 32, 0))


class TestLearning:
    def test_loss_decreases_and_stabilizes(self):
        # non-increasing after epoch 5 up to 5% noise, recorded for this seed
        _, history = run(m=4, seed=0, epochs=15, n=2048)
        losses = [h.mean_meta_loss for h in history]
        assert losses[-1] < losses[0]
        for prev, cur in zip(losses[5:], losses[6:]):
            assert cur <= prev * 1.05

    def test_fixed_dataset_path(self):
        rng = np.random.default_rng(3)
        X, Y = temporal2d_dataset(512, rng)
        model = fresh_model(2)
        opt = mhp.make_optimizer("sgd_momentum", model, 0.02, 0.9)
        history = train(model, (X, Y), MetaLossConfig(2, 0.05, 0.01), opt,
                        TrainSchedule(3, 32, 0))
        assert len(history) == 3
        assert history[-1].mean_meta_loss < history[0].mean_meta_loss

    def test_classification_path(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(256, 2))
        y = (X[:, 0] > 0).astype(np.int64)
        model = fresh_model(1, in_dim=2, out_dim=2)
        opt = mhp.make_optimizer("sgd_momentum", model, 0.1, 0.9)
        cfg = MetaLossConfig(1, base_loss=CROSS_ENTROPY, dropout_prob=0.0)
        history = train(model, (X, y), cfg, opt, TrainSchedule(10, 32, 0))
        assert history[-1].mean_meta_loss < 0.3

    def test_rmsprop_trains(self):
        model = fresh_model(2)
        opt = mhp.make_optimizer("rmsprop", model, 0.001, 0.9)
        history = train(model, temporal_sampler, MetaLossConfig(2, 0.05, 0.01),
                        opt, TrainSchedule(4, 32, 0, samples_per_epoch=1024))
        assert history[-1].mean_meta_loss < history[0].mean_meta_loss

    def test_oracle_min_not_above_meta_loss(self):
        _, history = run(m=4, epochs=3)
        for h in history:
            assert h.oracle_min_loss <= h.mean_meta_loss + 1e-12
