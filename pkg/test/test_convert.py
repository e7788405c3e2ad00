import numpy as np
import pytest

from convert.conversion import ConversionMode, ConversionPlan, absorb_beta, convert_dnn_to_snn, plan_landscape
from convert.scaling import (
    BETA_GRID,
    ScalePair,
    compute_loss,
    find_scaling_factors,
    loss_landscape,
    split_calibration_diagnostic,
)
from dnn.stats import ActivationStats, collect_activation_stats, percentile_table
from dnn.training import TrainConfig, accuracy, train_dnn
from netcore.errors import CalibrationError
from netcore.network import build_convnet, build_mlp
from snn.finetune import finetune_sgl
from snn.network import NeuronParams, SpikingNetwork, snn_accuracy, snn_forward
from utils.data_loader import make_blobs, train_test_split


def exhaustive_min(P, mu, T):
    best = abs(compute_loss(P, mu, 1.0, 1.0, T))
    for p in P:
        if p <= 0:
            continue
        for beta in BETA_GRID:
            best = min(best, abs(compute_loss(P, mu, p / mu, beta, T)))
    return best


class TestComputeLoss:
    def test_two_percentiles(self):
        assert compute_loss([0.25, 0.75], 1.0, 1.0, 1.0, 2) == pytest.approx(0.5)

    def test_saturated_segment_only(self):
        assert compute_loss([1.5], 1.0, 0.5, 1.0, 2) == pytest.approx(0.5)

    @pytest.mark.parametrize("alpha,beta,T", [(1.0, 1.0, 2), (0.3, 1.7, 3), (0.9, 0.0, 5)])
    def test_zero_percentile(self, alpha, beta, T):
        assert compute_loss([0.0], 2.0, alpha, beta, T) == 0.0

    def test_top_of_staircase_closes_last_step(self):
        # p == alpha * mu falls in the last step j = T - 1
        assert compute_loss([1.0], 1.0, 1.0, 1.0, 4) == pytest.approx(0.25)

    def test_uniform_percentiles_vanish_at_large_T(self):
        P = percentile_table(np.random.default_rng(0).uniform(0.0, 1.0, 100_000))
        assert abs(compute_loss(P, 1.0, 1.0, 1.0, 64)) / P.sum() < 0.02


class TestFindScalingFactors:
    def test_incumbent_kept_at_zero_loss(self):
        P = np.array([0.0, 0.5])
        assert compute_loss(P, 1.0, 1.0, 1.0, 2) == 0.0
        assert find_scaling_factors(P, 1.0, 2) == ScalePair(1.0, 1.0)

    def test_grid_optimality(self):
        rng = np.random.default_rng(42)
        for trial in range(100):
            T = 2 if trial % 2 else 3
            mu = rng.uniform(0.5, 2.0)
            samples = rng.gamma(rng.uniform(0.5, 3.0), mu / 4, size=300)
            table = percentile_table(samples)
            P = table[:np.count_nonzero(table <= mu)]
            if P.size == 0:
                continue
            pair = find_scaling_factors(P, mu, T)
            assert abs(compute_loss(P, mu, pair.alpha, pair.beta, T)) == pytest.approx(
                exhaustive_min(P, mu, T), abs=1e-12)

    def test_small_activations_pick_sub_unity_alpha(self):
        P = percentile_table(np.random.default_rng(1).uniform(0.0, 0.2, 5000))
        pair = find_scaling_factors(P, 1.0, 2)
        assert pair.alpha < 1.0
        assert abs(compute_loss(P, 1.0, pair.alpha, pair.beta, 2)) < abs(compute_loss(P, 1.0, 1.0, 1.0, 2))

    def test_alpha_is_a_percentile_ratio(self):
        P = percentile_table(np.random.default_rng(2).exponential(0.3, 2000))
        P = P[P <= 1.0]
        pair = find_scaling_factors(P, 1.0, 2)
        assert pair == ScalePair(1.0, 1.0) or np.any(np.isclose(P / 1.0, pair.alpha, rtol=0, atol=0))
        assert pair.beta in BETA_GRID

    def test_empty_table(self):
        with pytest.raises(CalibrationError):
            find_scaling_factors([], 1.0, 2)


class TestDiagnostics:
    def test_landscape_shape(self):
        P = np.array([0.0, 0.2, 0.2, 0.6])
        frame = loss_landscape(P, 1.0, 2, beta_step=5)
        assert list(frame.columns) == ["alpha", "beta", "loss"]
        assert len(frame) == 2 * 41
        row = frame[(frame.alpha == 0.6) & (frame.beta == 1.0)].iloc[0]
        assert row.loss == pytest.approx(compute_loss(P, 1.0, 0.6, 1.0, 2))

    def test_split_calibration(self):
        result = split_calibration_diagnostic(np.random.default_rng(0).exponential(0.2, 4000), 1.0, 2)
        assert set(result) == {"alpha", "beta", "fit_loss", "holdout_loss"}
        assert 0 < result["alpha"] <= 1


@pytest.fixture
def toy_stats(trained_mlp):
    dnn, train, _ = trained_mlp
    return dnn, collect_activation_stats(dnn, train)


class TestConvert:
    def test_naive(self, toy_stats):
        dnn, stats = toy_stats
        snn, plan = convert_dnn_to_snn(dnn, stats, 2, ConversionMode.NAIVE)
        for i in dnn.thresholded_indices():
            assert snn.neurons[i].vth == dnn.layers[i].mu
            assert snn.neurons[i].beta == 1.0 and snn.neurons[i].delta == 0.0
            assert plan.layers[i].beta == 1.0

    def test_max_act_bias(self, toy_stats):
        dnn, stats = toy_stats
        snn, _ = convert_dnn_to_snn(dnn, stats, 4, ConversionMode.MAX_ACT_BIAS)
        for i in dnn.thresholded_indices():
            assert snn.neurons[i].vth == stats[i].d_max
            assert snn.neurons[i].delta == pytest.approx(stats[i].d_max / 8)

    def test_scaled_matches_search(self, toy_stats):
        dnn, stats = toy_stats
        snn, plan = convert_dnn_to_snn(dnn, stats, 2, ConversionMode.SCALED)
        for i in dnn.thresholded_indices():
            pair = find_scaling_factors(stats[i].calibration_percentiles, dnn.layers[i].mu, 2)
            assert (plan.layers[i].alpha, plan.layers[i].beta) == (pair.alpha, pair.beta)
            assert snn.neurons[i].vth == pytest.approx(pair.alpha * dnn.layers[i].mu)
            assert snn.neurons[i].delta == 0.0 and snn.neurons[i].lam == 1.0

    @pytest.mark.parametrize("mode", list(ConversionMode))
    def test_weights_preserved(self, toy_stats, mode):
        dnn, stats = toy_stats
        snn, _ = convert_dnn_to_snn(dnn, stats, 2, mode)
        for a, b in zip(dnn.layers, snn.network.layers):
            if a.weight is not None:
                assert np.array_equal(a.weight, b.weight)

    def test_missing_layer_stats(self, toy_stats):
        dnn, _ = toy_stats
        with pytest.raises(CalibrationError):
            convert_dnn_to_snn(dnn, ActivationStats(), 2)

    def test_plan_dict_round_trip_and_landscape(self, toy_stats):
        dnn, stats = toy_stats
        _, plan = convert_dnn_to_snn(dnn, stats, 2)
        restored = ConversionPlan.from_dict(plan.to_dict())
        assert restored.layers == plan.layers
        frame = plan_landscape(plan, stats, beta_step=20)
        assert set(frame.layer) == set(plan.layers)


def random_spiking(rng, conv=False):
    if conv:
        net = build_convnet((1, 6, 6), [3], [5], 3, rng)
    else:
        net = build_mlp(4, [6, 5], 3, rng)
    neurons = {i: NeuronParams(rng.uniform(0.2, 1.0), rng.uniform(0.2, 2.0))
               for i in net.thresholded_indices()}
    return SpikingNetwork(net, neurons)


class TestAbsorbBeta:
    def test_identity_when_beta_is_one(self, rng):
        snn = random_spiking(rng)
        for p in snn.neurons.values():
            p.beta = 1.0
        absorbed = absorb_beta(snn)
        for a, b in zip(snn.network.layers, absorbed.network.layers):
            if a.weight is not None:
                assert np.array_equal(a.weight, b.weight)

    def test_forward_equivalence(self):
        rng = np.random.default_rng(7)
        for trial in range(50):
            snn = random_spiking(rng, conv=trial % 10 == 0)
            x = rng.random((4,) + snn.network.input_shape)
            absorbed = absorb_beta(snn)
            assert all(p.beta == 1.0 for p in absorbed.neurons.values())
            for T in (1, 2, 3):
                before, _, _ = snn_forward(snn, x, T)
                after, _, _ = snn_forward(absorbed, x, T)
                assert np.allclose(before, after, rtol=0, atol=1e-9)

    def test_idempotent(self, rng):
        once = absorb_beta(random_spiking(rng))
        twice = absorb_beta(once)
        for a, b in zip(once.network.layers, twice.network.layers):
            if a.weight is not None:
                assert np.array_equal(a.weight, b.weight)

    def test_original_untouched(self, rng):
        snn = random_spiking(rng)
        betas = {i: p.beta for i, p in snn.neurons.items()}
        absorb_beta(snn)
        assert {i: p.beta for i, p in snn.neurons.items()} == betas


@pytest.mark.slow
def test_scaled_conversion_beats_naive_and_finetuning_recovers():
    scaled_wins, recovered = 0, 0
    for seed in range(5):
        # eight features keep random cluster centres far apart, so every seed is learnable
        data = make_blobs(1200, 4, n_features=8, spread=0.3, seed=seed)
        train, test = train_test_split(data, 0.25, seed=seed)
        net = build_mlp(8, [64, 64], 4, np.random.default_rng(seed))
        dnn = train_dnn(net, train, TrainConfig(epochs=40, learning_rate=0.05, momentum=0.5, seed=seed))
        assert accuracy(dnn, train) >= 0.95
        stats = collect_activation_stats(dnn, train)
        naive, _ = convert_dnn_to_snn(dnn, stats, 2, ConversionMode.NAIVE)
        scaled, _ = convert_dnn_to_snn(dnn, stats, 2, ConversionMode.SCALED)
        scaled_acc = snn_accuracy(scaled, test, 2)
        scaled_wins += scaled_acc >= snn_accuracy(naive, test, 2)
        tuned = finetune_sgl(scaled, train, 2, TrainConfig(epochs=8, learning_rate=0.005, momentum=0.5, seed=seed))
        recovered += snn_accuracy(tuned, test, 2) >= accuracy(dnn, test) - 0.03
    assert scaled_wins >= 4
    assert recovered >= 4
