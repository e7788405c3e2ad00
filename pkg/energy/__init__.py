"""
Energy Package - spiking activity, FLOP counts and inference energy.
"""

from .flops import LayerFlops, spiking_activity, count_flops_dnn, count_flops_snn

from .model import (
    PRESETS,
    EnergyModel,
    LayerCost,
    CostReport,
    compute_energy_cmos,
    compute_energy_neuromorphic,
    spike_histogram,
    build_cost_report,
)

__all__ = [
    # FLOPs
    "LayerFlops",
    "spiking_activity",
    "count_flops_dnn",
    "count_flops_snn",
    # Energy
    "PRESETS",
    "EnergyModel",
    "LayerCost",
    "CostReport",
    "compute_energy_cmos",
    "compute_energy_neuromorphic",
    "spike_histogram",
    "build_cost_report",
]
