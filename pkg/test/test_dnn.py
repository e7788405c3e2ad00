import numpy as np
import pytest
from pydantic import ValidationError

from dnn.activation import threshold_relu, threshold_relu_grad
from dnn.stats import collect_activation_stats, layer_stats_from_samples, percentile_table
from dnn.training import TrainConfig, accuracy, dataset_loss, learning_rate_at, network_gradients, train_dnn
from netcore.errors import ArgumentError, StatsError, TrainingError
from netcore.network import build_mlp
from utils.data_loader import Dataset


@pytest.fixture
def tiny_set():
    rng = np.random.default_rng(5)
    x0 = rng.uniform(0.05, 0.3, size=(8, 2))
    x1 = rng.uniform(0.7, 0.95, size=(8, 2))
    return Dataset(np.vstack([x0, x1]), np.array([0] * 8 + [1] * 8), 2)


class TestThresholdRelu:
    @pytest.mark.parametrize("x,expected", [(-1.0, 0.0), (0.5, 0.5), (2.0, 1.0)])
    def test_values(self, x, expected):
        assert threshold_relu(x, 1.0) == expected

    def test_grad_interior(self):
        d_dx, d_dmu = threshold_relu_grad(0.5, 1.0)
        assert d_dx == 1.0 and d_dmu == 0.0

    def test_grad_saturated(self):
        d_dx, d_dmu = threshold_relu_grad(2.0, 1.0)
        assert d_dx == 0.0 and d_dmu == 1.0

    def test_finite_differences(self):
        rng = np.random.default_rng(9)
        mu, eps = 1.3, 1e-6
        x = rng.uniform(-1.0, 3.0, size=500)
        x = x[(np.abs(x) >= 1e-3) & (np.abs(x - mu) >= 1e-3)]
        d_dx, d_dmu = threshold_relu_grad(x, mu)
        num_dx = (threshold_relu(x + eps, mu) - threshold_relu(x - eps, mu)) / (2 * eps)
        num_dmu = (threshold_relu(x, mu + eps) - threshold_relu(x, mu - eps)) / (2 * eps)
        assert np.allclose(d_dx, num_dx, atol=1e-5)
        assert np.allclose(d_dmu, num_dmu, atol=1e-5)

    def test_non_positive_mu(self):
        with pytest.raises(ArgumentError):
            threshold_relu(1.0, 0.0)

    def test_idempotent(self):
        x = np.linspace(-2.0, 3.0, 101)
        once = threshold_relu(x, 1.3)
        assert np.array_equal(threshold_relu(once, 1.3), once)

    def test_monotone_in_x_and_mu(self):
        x = np.linspace(-2.0, 3.0, 101)
        assert np.all(np.diff(threshold_relu(x, 1.3)) >= 0)
        mus = np.linspace(0.1, 3.0, 30)
        values = np.array([threshold_relu(x, mu) for mu in mus])
        assert np.all(np.diff(values, axis=0) >= 0)


class TestTrainConfig:
    def test_milestones_must_increase(self):
        with pytest.raises(ValidationError):
            TrainConfig(milestones=(0.8, 0.6))

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError):
            TrainConfig(epochs=3, learning_rte=0.1)

    def test_step_schedule(self):
        cfg = TrainConfig(epochs=10, learning_rate=0.01, decay_factor=0.1, milestones=(0.5, 0.8))
        assert learning_rate_at(cfg, 0) == pytest.approx(0.01)
        assert learning_rate_at(cfg, 5) == pytest.approx(0.001)
        assert learning_rate_at(cfg, 9) == pytest.approx(0.0001)


class TestGradients:
    def test_weight_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        net = build_mlp(3, [4], 2, rng, mu=5.0)
        x, y = rng.uniform(0.1, 1.0, size=(6, 3)), np.array([0, 1, 0, 1, 1, 0])
        _, grad_w, _ = network_gradients(net, x, y)
        eps = 1e-6
        for index in net.weighted_indices():
            w = net.layers[index].weight
            for pos in [(0, 0), (1, 2)]:
                original = w[pos]
                w[pos] = original + eps
                up, _, _ = network_gradients(net, x, y)
                w[pos] = original - eps
                down, _, _ = network_gradients(net, x, y)
                w[pos] = original
                assert grad_w[index][pos] == pytest.approx((up - down) / (2 * eps), abs=1e-6)


class TestTrainDnn:
    def test_overfits_tiny_set(self, tiny_set):
        net = build_mlp(2, [32], 2, np.random.default_rng(0))
        cfg = TrainConfig(epochs=200, learning_rate=0.1, momentum=0.9, batch_size=16, seed=0)
        trained = train_dnn(net, tiny_set, cfg)
        assert accuracy(trained, tiny_set) == 1.0
        assert dataset_loss(trained, tiny_set) < dataset_loss(net, tiny_set)

    def test_zero_learning_rate_keeps_weights(self, tiny_set):
        net = build_mlp(2, [8], 2, np.random.default_rng(0))
        trained = train_dnn(net, tiny_set, TrainConfig(epochs=3, learning_rate=0.0))
        for a, b in zip(net.layers, trained.layers):
            assert np.array_equal(a.weight, b.weight) and a.mu == b.mu

    def test_seeded_runs_are_identical(self, tiny_set):
        net = build_mlp(2, [8], 2, np.random.default_rng(0), dropout=0.2)
        cfg = TrainConfig(epochs=5, learning_rate=0.05, dropout=0.2, seed=7)
        a, b = train_dnn(net, tiny_set, cfg), train_dnn(net, tiny_set, cfg)
        for la, lb in zip(a.layers, b.layers):
            if la.weight is not None:
                assert np.array_equal(la.weight, lb.weight)

    def test_history_records_mu(self, tiny_set):
        history = []
        train_dnn(build_mlp(2, [8], 2, np.random.default_rng(0)), tiny_set,
                  TrainConfig(epochs=2, learning_rate=0.05), history=history)
        assert [r["epoch"] for r in history] == [0, 1]
        assert set(history[0]["mu"]) == {"0"}

    def test_huge_learning_rate_diverges(self, tiny_set):
        # unclipped ReLUs let the first oversized step overflow the logits
        net = build_mlp(2, [16, 16], 2, np.random.default_rng(0), mu=1e300)
        with pytest.raises(TrainingError) as info:
            train_dnn(net, tiny_set, TrainConfig(epochs=5, learning_rate=1e300, batch_size=16))
        assert info.value.epoch is not None

    def test_loss_falls_over_trailing_windows(self, blobs):
        history = []
        net = build_mlp(2, [32, 32], 4, np.random.default_rng(2))
        train_dnn(net, blobs, TrainConfig(epochs=30, learning_rate=0.05, momentum=0.5, seed=2), history=history)
        windows = np.array([r["loss"] for r in history]).reshape(6, 5).mean(axis=1)
        assert np.all(np.diff(windows) <= 1e-3)
        assert windows[-1] < windows[0]

    def test_empty_data(self):
        empty = Dataset(np.zeros((0, 2)), np.zeros(0), 2)
        with pytest.raises(ArgumentError):
            train_dnn(build_mlp(2, [4], 2, np.random.default_rng(0)), empty, TrainConfig(epochs=1))


class TestActivationStats:
    def test_uniform_grid(self):
        stats = layer_stats_from_samples(0, 50.0, np.arange(101, dtype=float))
        assert np.array_equal(stats.percentiles, np.arange(101))
        assert stats.M == 50

    def test_constant_samples(self):
        stats = layer_stats_from_samples(0, 1.0, np.full(37, 0.4))
        assert np.all(stats.percentiles == 0.4)
        assert stats.M == 100

    def test_sort_oracle(self):
        samples = np.random.default_rng(3).exponential(0.5, size=1234)
        ordered = np.sort(samples)
        expected = [ordered[(j * (samples.size - 1)) // 100] for j in range(101)]
        assert np.array_equal(percentile_table(samples), expected)

    def test_invariants(self):
        stats = layer_stats_from_samples(0, 0.7, np.random.default_rng(4).normal(0.3, 0.4, 5000))
        assert np.all(np.diff(stats.percentiles) >= 0)
        assert stats.percentiles[stats.M] <= 0.7
        assert stats.M == 100 or stats.percentiles[stats.M + 1] > 0.7

    def test_empty(self):
        with pytest.raises(StatsError):
            percentile_table(np.array([]))

    def test_collect_from_network(self, blobs):
        net = build_mlp(2, [16, 8], 4, np.random.default_rng(0))
        stats = collect_activation_stats(net, blobs, batch_size=100, reservoir_size=500)
        assert sorted(stats.layers) == net.thresholded_indices()
        assert stats[0].samples.size == 500
        assert stats[0].d_max >= stats[0].percentiles[-1]

    def test_collect_empty(self, blobs):
        with pytest.raises(StatsError):
            collect_activation_stats(build_mlp(2, [4], 4, np.random.default_rng(0)), blobs, max_samples=0)
