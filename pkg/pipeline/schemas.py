"""
Pydantic schemas of the run manifest and the published metrics document.
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

SCHEMA_VERSION = 1


class SchemaBase(BaseModel):
    """Base class for every persisted document."""

    model_config = ConfigDict(extra="forbid")


class StageRecord(SchemaBase):
    wall_clock_s: float = Field(ge=0.0)
    finished_at: str
    artifacts: Dict[str, str] = Field(default_factory=dict, description="file name -> sha256")


class RunManifest(SchemaBase):
    schema_version: int = SCHEMA_VERSION
    tool_version: str
    config_hash: str
    created_at: str
    stages: Dict[str, StageRecord] = Field(default_factory=dict)

    def artifacts(self) -> Dict[str, str]:
        """Latest checksum of every file produced by any stage."""
        merged: Dict[str, str] = {}
        for record in self.stages.values():
            merged.update(record.artifacts)
        return merged


class LayerMetrics(SchemaBase):
    layer: int
    spikes_per_neuron: Optional[float] = None
    snn_mac: float
    snn_ac: float
    dnn_mac: float


class AccuracyPoint(SchemaBase):
    T: int = Field(ge=1)
    accuracy: float = Field(ge=0.0, le=1.0)


class EvaluationMetrics(SchemaBase):
    """Published shape of ``metrics.json``."""

    schema_version: int = SCHEMA_VERSION
    time_steps: int = Field(ge=1)
    mode: str
    finetuned: bool
    dnn_accuracy: float = Field(ge=0.0, le=1.0)
    snn_accuracy: float = Field(ge=0.0, le=1.0)
    accuracy_vs_T: List[AccuracyPoint]
    layers: List[LayerMetrics]
    energy_cmos_snn: float = Field(ge=0.0)
    energy_cmos_dnn: float = Field(ge=0.0)
    energy_cmos_dnn_from_layer2: float = Field(ge=0.0)
    dnn_snn_energy_ratio: Optional[float] = None
    energy_neuromorphic: Dict[str, float]
    layer_delta: Dict[str, float] = Field(default_factory=dict,
                                          description="measured per-layer conversion error at time_steps")
