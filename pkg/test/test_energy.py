import numpy as np
import pytest
from pydantic import ValidationError

from conftest import dense
from energy.flops import LayerFlops, count_flops_dnn, count_flops_snn, spiking_activity
from energy.model import (
    EnergyModel,
    build_cost_report,
    compute_energy_cmos,
    compute_energy_neuromorphic,
    spike_histogram,
)
from netcore.errors import ArgumentError, DimensionError, EnergyConfigError
from netcore.network import LayerKind, LayerSpec, NetworkSpec, build_convnet, build_mlp
from snn.network import NeuronParams, SpikeTrace, SpikingNetwork, snn_forward


def trace_for(net, T, batch, p=0.0, seed=0):
    rng = np.random.default_rng(seed)
    shapes = net.layer_shapes()
    trace = SpikeTrace(T=T, batch_size=batch)
    for i in net.thresholded_indices():
        trace.events[i] = rng.random((T, batch) + shapes[i + 1]) < p
        trace.values[i] = 1.0
    return trace


def counted_accumulations(w, events, padding):
    """Walk every spike and every kernel tap that reads it."""
    oc, _, kh, kw = w.shape
    _, _, c, h, wd = events.shape
    ho, wo = h + 2 * padding - kh + 1, wd + 2 * padding - kw + 1
    total = 0
    for t, n, ch, i, j in zip(*np.nonzero(events)):
        for a in range(kh):
            for b in range(kw):
                oi, oj = i + padding - a, j + padding - b
                if 0 <= oi < ho and 0 <= oj < wo:
                    total += oc
    return total


class TestSpikingActivity:
    def test_eight_spikes_over_four_neurons(self):
        events = np.zeros((4, 1, 4), dtype=bool)
        events[0, 0, :] = True
        events[3, 0, :] = True
        trace = SpikeTrace(T=4, batch_size=1, events={0: events}, values={0: 1.0})
        assert spiking_activity(trace, 0) == 2.0

    def test_silent(self):
        trace = SpikeTrace(T=3, batch_size=2, events={0: np.zeros((3, 2, 5), dtype=bool)}, values={0: 1.0})
        assert spiking_activity(trace, 0) == 0.0

    def test_manual_count(self):
        events = np.zeros((2, 2, 3), dtype=bool)
        events[0, 0, 1] = events[1, 0, 1] = events[1, 1, 2] = True
        trace = SpikeTrace(T=2, batch_size=2, events={4: events}, values={4: 0.5})
        assert spiking_activity(trace, 4) == pytest.approx(3 / 6)

    def test_missing_layer(self):
        with pytest.raises(ArgumentError):
            spiking_activity(SpikeTrace(T=1, batch_size=1), 0)


class TestDnnFlops:
    def test_dense(self):
        net = NetworkSpec((4,), [dense(np.ones((3, 4)))])
        assert count_flops_dnn(net)[0].mac == 12

    def test_pointwise_conv(self):
        net = NetworkSpec((1, 5, 5), [LayerSpec(LayerKind.CONV2D, weight=np.ones((1, 1, 1, 1)), mu=1.0),
                                      dense(np.ones((2, 25)))])
        assert count_flops_dnn(net)[0].mac == 25

    def test_convnet_tally(self, rng):
        net = build_convnet((1, 8, 8), [4, 4, 8], [16], 3, rng)
        expected = [
            4 * 8 * 8 * (1 * 9),
            4 * 8 * 8 * (4 * 9),
            8 * 4 * 4 * (4 * 9),
            16 * (8 * 2 * 2),
            3 * 16,
        ]
        assert [c.mac for c in count_flops_dnn(net)] == expected

    def test_shape_mismatch(self, rng):
        with pytest.raises(DimensionError):
            count_flops_dnn(build_mlp(3, [4], 2, rng), (5,))


class TestSnnFlops:
    def test_zero_trace(self, rng):
        net = build_mlp(3, [5, 4], 2, rng)
        counts = count_flops_snn(net, trace_for(net, 4, 2), 4)
        assert counts[0].mac == 4 * 15
        assert all(c.ac == 0 for c in counts)
        assert all(c.mac == 0 for c in counts[1:])

    def test_two_spikes_into_dense_2_to_3(self):
        net = NetworkSpec((1,), [dense([[1.0], [1.0]], mu=1.0), dense(np.ones((3, 2)))])
        events = np.zeros((2, 1, 2), dtype=bool)
        events[0, 0, :] = True
        trace = SpikeTrace(T=2, batch_size=1, events={0: events}, values={0: 1.0})
        assert count_flops_snn(net, trace, 2)[1].ac == 6

    def test_linear_in_spikes(self, rng):
        net = build_mlp(3, [6], 2, rng)
        events = np.zeros((2, 1, 6), dtype=bool)
        events[:, 0, :2] = True
        full = SpikeTrace(T=2, batch_size=1, events={0: events}, values={0: 1.0})
        half_events = events.copy()
        half_events[1] = False
        half = SpikeTrace(T=2, batch_size=1, events={0: half_events}, values={0: 1.0})
        assert count_flops_snn(net, half, 2)[1].ac == count_flops_snn(net, full, 2)[1].ac / 2

    def test_conv_matches_instrumented_count(self, rng):
        net = build_convnet((1, 6, 6), [2, 3], [4], 2, rng)
        trace = trace_for(net, 3, 2, p=0.3, seed=1)
        counts = count_flops_snn(net, trace, 3)
        conv = net.layers[1]
        expected = counted_accumulations(conv.weight, trace.events[0], conv.padding) / 2
        assert counts[1].ac == expected

    def test_pooled_spikes_feed_dense(self, rng):
        net = build_convnet((1, 4, 4), [2], [3], 2, rng)
        events = np.zeros((1, 1, 2, 4, 4), dtype=bool)
        events[0, 0, 0, 0, 0] = events[0, 0, 0, 0, 1] = True  # same pool window
        events[0, 0, 1, 3, 3] = True
        dense_index = net.weighted_indices()[1]
        assert net.thresholded_indices() == [0, dense_index]
        silent = np.zeros((1, 1, 3), dtype=bool)
        trace = SpikeTrace(T=1, batch_size=1, events={0: events, dense_index: silent},
                           values={0: 1.0, dense_index: 1.0})
        ac = {c.layer: c.ac for c in count_flops_snn(net, trace, 1)}
        assert ac[dense_index] == 2 * 3

    def test_mismatched_trace(self, rng):
        net = build_mlp(3, [5], 2, rng)
        with pytest.raises(ArgumentError):
            count_flops_snn(net, trace_for(net, 2, 1), 3)
        with pytest.raises(ArgumentError):
            count_flops_snn(net, SpikeTrace(T=2, batch_size=1), 2)


class TestEnergy:
    def test_cmos_constants(self):
        costs = [LayerFlops(0, "dense", mac=1e6), LayerFlops(1, "dense", ac=1e8)]
        assert compute_energy_cmos(costs) == pytest.approx(13.2e-6, rel=1e-12)

    def test_zero(self):
        assert compute_energy_cmos([LayerFlops(0, "dense")]) == 0.0

    def test_dnn_vs_snn_ratio(self):
        dnn = [LayerFlops(0, "dense", mac=100), LayerFlops(1, "dense", mac=1000)]
        snn = [LayerFlops(0, "dense", mac=200), LayerFlops(1, "dense", ac=500)]
        ratio = compute_energy_cmos(dnn, dnn=True) / compute_energy_cmos(snn)
        assert ratio == pytest.approx((1100 * 3.2) / (200 * 3.2 + 500 * 0.1))

    def test_dnn_total_from_second_layer(self):
        dnn = [LayerFlops(0, "dense", mac=100), LayerFlops(1, "dense", mac=1000)]
        assert compute_energy_cmos(dnn, dnn=True, skip_first=True) == pytest.approx(1000 * 3.2e-12)

    def test_truenorth(self):
        assert compute_energy_neuromorphic(100, 2, "truenorth") == pytest.approx(41.2, abs=1e-12)

    def test_spinnaker(self):
        assert compute_energy_neuromorphic(100, 2, "SpiNNaker") == pytest.approx(64.72, abs=1e-12)

    def test_zero_steps_rejected(self):
        with pytest.raises(ArgumentError):
            compute_energy_neuromorphic(0, 0, "truenorth")

    def test_unknown_preset(self):
        with pytest.raises(EnergyConfigError):
            compute_energy_neuromorphic(10, 2, "loihi")

    def test_monotone(self):
        assert compute_energy_neuromorphic(101, 2, "truenorth") > compute_energy_neuromorphic(100, 2, "truenorth")
        assert compute_energy_neuromorphic(100, 3, "truenorth") > compute_energy_neuromorphic(100, 2, "truenorth")

    def test_model_requires_mac_above_ac(self):
        with pytest.raises(ValidationError):
            EnergyModel(e_mac=0.1, e_ac=0.2)


class TestCostReport:
    def test_totals_are_sums(self, rng):
        net = build_mlp(2, [16, 16], 4, rng)
        snn = SpikingNetwork(net, {i: NeuronParams(0.2) for i in net.thresholded_indices()})
        _, trace, _ = snn_forward(snn, rng.random((8, 2)), 3)
        report = build_cost_report(net, trace, 3)
        assert report.totals["energy_cmos_snn"] == pytest.approx(sum(c.energy_snn for c in report.layers))
        assert report.totals["snn_ac"] == pytest.approx(sum(c.snn_ac for c in report.layers))
        assert set(report.totals["energy_neuromorphic"]) == {"truenorth", "spinnaker"}
        assert len(report.to_frame()) == len(net.weighted_indices())
        assert report.to_dict()["schema_version"] == 1

    def test_silent_network_costs_only_first_layer(self, rng):
        net = build_mlp(2, [16, 16], 4, rng)
        report = build_cost_report(net, trace_for(net, 2, 5), 2)
        assert all(c.snn_ac == 0 and c.energy_snn == 0 for c in report.layers[1:])

    def test_sparse_activity_gives_large_ratio(self, rng):
        net = build_mlp(2, [64, 64], 4, rng)
        trace = trace_for(net, 2, 50, p=0.03, seed=3)
        assert all(spiking_activity(trace, i) < 0.1 for i in net.thresholded_indices())
        report = build_cost_report(net, trace, 2)
        assert report.totals["dnn_snn_energy_ratio"] > 10

    def test_histogram_counts_every_neuron(self, rng):
        net = build_mlp(2, [16], 4, rng)
        trace = trace_for(net, 3, 7, p=0.5, seed=2)
        frame = spike_histogram(trace)
        assert frame.neurons.sum() == 7 * 16
        assert set(frame.spikes) == {0, 1, 2, 3}
