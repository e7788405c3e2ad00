"""
Energy models and the per-run cost report.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from netcore.errors import ArgumentError, EnergyConfigError
from netcore.network import NetworkSpec
from snn.network import SpikeTrace

from .flops import LayerFlops, count_flops_dnn, count_flops_snn, spiking_activity

logger = logging.getLogger(__name__)

PICOJOULE = 1e-12

# Normalised (compute, static) energy per operation / per time step
PRESETS: Dict[str, tuple] = {
    "truenorth": (0.4, 0.6),
    "spinnaker": (0.64, 0.36),
}

DNN_FORMULA_NOTE = (
    "DNN energy charges every DNN FLOP at E_MAC; a printed variant of the formula "
    "uses E_AC, which contradicts DNN FLOPs being MACs"
)


class EnergyModel(BaseModel):
    """Per-operation energies in picojoules (45 nm CMOS defaults)."""

    model_config = ConfigDict(extra="forbid")

    e_mac: float = Field(3.2, gt=0.0)
    e_ac: float = Field(0.1, gt=0.0)

    @model_validator(mode="after")
    def _mac_costs_more(self) -> "EnergyModel":
        if not self.e_mac > self.e_ac:
            raise ValueError(f"e_mac ({self.e_mac}) must exceed e_ac ({self.e_ac})")
        return self


def compute_energy_cmos(costs: Sequence[LayerFlops], model: Optional[EnergyModel] = None,
                        dnn: bool = False, skip_first: bool = False) -> float:
    """
    Compute energy in joules.

    Args:
        costs: Per-layer counts from ``count_flops_snn`` or ``count_flops_dnn``
        model: Operation energies (defaults to EnergyModel())
        dnn: Charge every operation at e_mac (DNN accounting)
        skip_first: Leave out the first layer (the l >= 2 DNN total)

    Returns:
        Energy in joules
    """
    model = model or EnergyModel()
    selected = list(costs)[1:] if skip_first else list(costs)
    if dnn:
        picojoules = sum(c.total * model.e_mac for c in selected)
    else:
        picojoules = sum(c.mac * model.e_mac + c.ac * model.e_ac for c in selected)
    return picojoules * PICOJOULE


def compute_energy_neuromorphic(total_flops: float, T: int, preset: str) -> float:
    """
    Normalised neuromorphic energy ``flops * e_compute + T * e_static``.

    Raises:
        EnergyConfigError: If ``preset`` is unknown
        ArgumentError: If T < 1 or flops is negative
    """
    key = preset.lower()
    if key not in PRESETS:
        raise EnergyConfigError(f"Unknown neuromorphic preset '{preset}'; choose from {sorted(PRESETS)}")
    if T < 1:
        raise ArgumentError(f"T must be at least 1, got {T}")
    if total_flops < 0:
        raise ArgumentError(f"FLOP count must be non-negative, got {total_flops}")
    e_compute, e_static = PRESETS[key]
    return total_flops * e_compute + T * e_static


@dataclass
class LayerCost:
    layer: int
    kind: str
    spikes_per_neuron: Optional[float]
    dnn_mac: float
    snn_mac: float
    snn_ac: float
    energy_snn: float
    energy_dnn: float


@dataclass
class CostReport:
    """Per-layer operation counts and energies of one evaluation, with totals."""

    T: int
    layers: List[LayerCost] = field(default_factory=list)
    totals: Dict[str, Any] = field(default_factory=dict)
    spike_histogram: pd.DataFrame = field(default_factory=pd.DataFrame)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": 1,
            "T": self.T,
            "layers": [vars(c) for c in self.layers],
            "totals": self.totals,
            "notes": [DNN_FORMULA_NOTE],
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(c) for c in self.layers])


def spike_histogram(trace: SpikeTrace) -> pd.DataFrame:
    """Long-format histogram of per-neuron spike counts (0..T) per layer, over all inputs."""
    rows = []
    for layer in trace.layers():
        per_neuron = trace.events[layer].sum(axis=0).ravel()
        counts = np.bincount(per_neuron, minlength=trace.T + 1)
        rows.extend({"layer": layer, "spikes": k, "neurons": int(c)} for k, c in enumerate(counts))
    return pd.DataFrame(rows, columns=["layer", "spikes", "neurons"])


def build_cost_report(net: NetworkSpec, trace: SpikeTrace, T: int, model: Optional[EnergyModel] = None,
                      presets: Sequence[str] = tuple(PRESETS)) -> CostReport:
    """
    Cost report of one simulated batch.

    Args:
        net: Simulated network layout
        trace: Spike trace of the batch
        T: Simulation length
        model: CMOS operation energies
        presets: Neuromorphic presets to evaluate

    Returns:
        CostReport whose totals equal the sum of its per-layer entries
    """
    model = model or EnergyModel()
    snn_counts = count_flops_snn(net, trace, T)
    dnn_counts = count_flops_dnn(net)
    spiking = {}
    # Spiking activity of the layer feeding each weighted layer
    weighted = net.weighted_indices()
    for prev, index in zip(weighted, weighted[1:]):
        spiking[index] = spiking_activity(trace, prev)
    report = CostReport(T=T)
    for s, d in zip(snn_counts, dnn_counts):
        report.layers.append(LayerCost(
            layer=s.layer, kind=s.kind,
            spikes_per_neuron=spiking_activity(trace, s.layer) if s.layer in trace.events else None,
            dnn_mac=d.mac, snn_mac=s.mac, snn_ac=s.ac,
            energy_snn=compute_energy_cmos([s], model),
            energy_dnn=compute_energy_cmos([d], model, dnn=True),
        ))
    snn_total = sum(c.energy_snn for c in report.layers)
    dnn_total = sum(c.energy_dnn for c in report.layers)
    snn_flops = sum(c.snn_mac + c.snn_ac for c in report.layers)
    report.totals = {
        "snn_mac": sum(c.snn_mac for c in report.layers),
        "snn_ac": sum(c.snn_ac for c in report.layers),
        "dnn_mac": sum(c.dnn_mac for c in report.layers),
        "energy_cmos_snn": snn_total,
        "energy_cmos_dnn": dnn_total,
        "energy_cmos_dnn_from_layer2": compute_energy_cmos(dnn_counts, model, dnn=True, skip_first=True),
        "dnn_snn_energy_ratio": dnn_total / snn_total if snn_total > 0 else None,
        "energy_neuromorphic": {p: compute_energy_neuromorphic(snn_flops, T, p) for p in presets},
        "hidden_spiking_activity": {str(k): v for k, v in sorted(spiking.items())},
    }
    report.spike_histogram = spike_histogram(trace)
    logger.info("SNN energy %.4g J vs DNN %.4g J (ratio %s)", snn_total, dnn_total,
                report.totals["dnn_snn_energy_ratio"])
    return report
