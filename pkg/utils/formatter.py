"""
Output formatting utilities for run artifacts and console summaries.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from netcore.errors import ArtifactError


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    """
    Write ``payload`` as sorted-key JSON so reruns produce identical bytes.

    Args:
        path: Destination file
        payload: JSON-compatible mapping (numpy scalars and arrays allowed)

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_to_builtin) + "\n", encoding="utf-8")
    return path


def read_json(path: Path) -> Dict[str, Any]:
    """
    Read a JSON artifact.

    Raises:
        ArtifactError: If the file is missing or malformed
    """
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"Artifact not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ArtifactError(f"{path} is not valid JSON: {e}") from e


def write_csv(path: Path, frame: pd.DataFrame) -> Path:
    """Write a long-format table without the index."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.10g")
    return path


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def format_stage_summary(stage: str, artifacts: List[Path], seconds: float) -> str:
    """
    Format a finished stage for display.

    Args:
        stage: Stage name
        artifacts: Files the stage wrote
        seconds: Wall-clock duration

    Returns:
        Formatted summary string
    """
    lines = [f"✅ {stage} finished in {seconds:.1f}s"]
    lines.extend(f"   📄 {Path(a).name}" for a in artifacts)
    return "\n".join(lines)


def format_metrics(metrics: Dict[str, Any]) -> str:
    """Format the headline evaluation numbers."""
    if not metrics:
        return "No metrics available"
    ratio = metrics.get("dnn_snn_energy_ratio")
    ratio_text = f"{ratio:.1f}x" if ratio else "n/a"
    lines = [
        f"🧠 DNN accuracy: {metrics['dnn_accuracy']:.2%}",
        f"⚡ SNN accuracy (T={metrics['time_steps']}, {metrics['mode']}"
        f"{', fine-tuned' if metrics.get('finetuned') else ''}): {metrics['snn_accuracy']:.2%}",
        f"🔋 Energy SNN {metrics['energy_cmos_snn']:.3e} J | DNN {metrics['energy_cmos_dnn']:.3e} J | ratio {ratio_text}",
    ]
    for layer in metrics.get("layers", []):
        spikes = layer.get("spikes_per_neuron")
        if spikes is not None:
            lines.append(f"   Layer {layer['layer']}: {spikes:.3f} spikes/neuron")
    return "\n".join(lines)


def format_error_report(report: Dict[str, Any]) -> str:
    """One line per (layer, T) with the headline error quantities."""
    records = report.get("records", [])
    if not records:
        return "No error estimates available"
    lines = ["📊 Conversion error estimates:"]
    for r in records:
        lines.append(f"   Layer {r['layer']} T={r['T']}: K={r['K']:.3f} h={r['h']:.3f} "
                     f"h'={r['h_prime']:.3f} delta={r['delta_empirical']:+.4f} "
                     f"(predicted {r['delta_predicted']:+.4f})")
    return "\n".join(lines)
