"""
Experiment runner - the train, calibrate/convert, fine-tune, evaluate,
analyze and energy-report stages over one run directory.

Every stage reads its inputs from the artifacts of earlier stages, so any
stage can be re-run on its own. Each stage records its wall-clock time and
the SHA-256 of every file it wrote in ``manifest.json``.
"""

import logging
import os
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from analysis.simulated import build_error_report, estimate_delta_simulated
from convert.conversion import ConversionPlan, absorb_beta, convert_dnn_to_snn, plan_landscape
from convert.scaling import split_calibration_diagnostic
from dnn.stats import collect_activation_stats, percentile_stability
from dnn.training import accuracy, train_dnn
from energy.model import EnergyModel, build_cost_report
from netcore.errors import ArtifactError, ConfigError, InsufficientSamplesError, MismatchError
from netcore.network import NetworkSpec, build_convnet, build_mlp
from netcore.weights_io import load_network, save_network
from snn.finetune import finetune_sgl
from snn.network import SpikingNetwork, load_spiking_network, save_spiking_network, snn_accuracy, snn_forward
from utils.data_loader import Dataset, load_idx_dataset, make_arcs, make_blobs, train_test_split
from utils.formatter import format_stage_summary, read_json, sha256_file, write_csv, write_json

from .config import ExperimentConfig, resolve_output_dir
from .schemas import EvaluationMetrics, RunManifest, StageRecord

logger = logging.getLogger(__name__)

TOOL_VERSION = "1.0.0"


class ExperimentRunner:
    """
    Runs pipeline stages for one experiment config inside its run directory.
    """

    def __init__(self, config: ExperimentConfig, output_dir: Optional[Path] = None, echo: bool = True):
        """
        Initialize the runner.

        Args:
            config: Validated experiment config
            output_dir: Run directory (defaults to the config's resolved output dir)
            echo: Print a console summary after every stage
        """
        self.config = config
        self.run_dir = Path(output_dir) if output_dir is not None else resolve_output_dir(config)
        self.echo = echo
        self._data: Optional[Tuple[Dataset, Dataset]] = None
        self._lock_depth = 0
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = self._load_manifest()

    # ------------------------------------------------------------------
    # Setup
    # ------------------------------------------------------------------

    def _load_manifest(self) -> RunManifest:
        path = self.path("manifest.json")
        if path.exists():
            manifest = RunManifest.model_validate(read_json(path))
            if manifest.config_hash != self.config.config_hash():
                logger.warning("Config changed since %s was created; later stages will overwrite it", path)
                manifest.config_hash = self.config.config_hash()
            return manifest
        return RunManifest(tool_version=TOOL_VERSION, config_hash=self.config.config_hash(),
                           created_at=datetime.now(timezone.utc).isoformat())

    def path(self, name: str) -> Path:
        return self.run_dir / name

    @contextmanager
    def lock(self):
        """
        Exclusive ownership of the run directory.

        Re-entrant within one runner, so ``run_pipeline`` holds the directory
        across all of its stages. The outermost acquisition reloads the
        manifest and writes ``config.json``.

        Raises:
            ArtifactError: If another run holds the lock
        """
        if self._lock_depth:
            self._lock_depth += 1
            try:
                yield
            finally:
                self._lock_depth -= 1
            return
        lock_path = self.path("run.lock")
        try:
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError as e:
            raise ArtifactError(f"{self.run_dir} is locked by another run ({lock_path})") from e
        self._lock_depth = 1
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            self.manifest = self._load_manifest()
            write_json(self.path("config.json"), self.config.model_dump(mode="json"))
            yield
        finally:
            self._lock_depth = 0
            lock_path.unlink(missing_ok=True)

    def _record(self, stage: str, started: float, artifacts: List[Path]) -> None:
        elapsed = time.perf_counter() - started
        self.manifest.stages[stage] = StageRecord(
            wall_clock_s=elapsed,
            finished_at=datetime.now(timezone.utc).isoformat(),
            artifacts={p.name: sha256_file(p) for p in artifacts},
        )
        write_json(self.path("manifest.json"), self.manifest.model_dump(mode="json"))
        logger.info("Stage %s finished in %.2fs", stage, elapsed)
        if self.echo:
            print(format_stage_summary(stage, artifacts, elapsed))

    def verify_manifest(self) -> List[str]:
        """Names of recorded artifacts whose checksum no longer matches (or that vanished)."""
        bad = []
        for name, digest in self.manifest.artifacts().items():
            path = self.path(name)
            if not path.exists() or sha256_file(path) != digest:
                bad.append(name)
        return bad

    # ------------------------------------------------------------------
    # Data and models
    # ------------------------------------------------------------------

    def load_data(self) -> Tuple[Dataset, Dataset]:
        """Train and test sets as configured (cached per runner)."""
        if self._data is not None:
            return self._data
        ds = self.config.dataset
        if ds.source == "idx":
            train = load_idx_dataset(ds.images_path, ds.labels_path)
            if ds.test_images_path is not None:
                test = load_idx_dataset(ds.test_images_path, ds.test_labels_path)
            else:
                train, test = train_test_split(train, ds.test_fraction, ds.seed)
        else:
            if ds.source == "blobs":
                full = make_blobs(ds.n_samples, ds.n_classes, ds.n_features, ds.spread, ds.seed)
            else:
                full = make_arcs(ds.n_samples, ds.n_classes, ds.noise, ds.seed)
            train, test = train_test_split(full, ds.test_fraction, ds.seed)
        if self.config.architecture.kind == "mlp" and train.x.ndim > 2:
            train = Dataset(train.x.reshape(len(train), -1), train.y, train.n_classes)
            test = Dataset(test.x.reshape(len(test), -1), test.y, test.n_classes)
        n_classes = max(train.n_classes, test.n_classes)
        self._data = (Dataset(train.x, train.y, n_classes), Dataset(test.x, test.y, n_classes))
        logger.info("Loaded %d training and %d test samples (%d classes)", len(train), len(test), n_classes)
        return self._data

    def build_network(self, data: Dataset) -> NetworkSpec:
        arch = self.config.architecture
        rng = np.random.default_rng(arch.seed)
        if arch.kind == "mlp":
            return build_mlp(int(np.prod(data.input_shape)), arch.hidden, data.n_classes, rng,
                             dropout=arch.dropout, mu=arch.mu)
        if len(data.input_shape) != 3:
            raise ConfigError(f"convnet needs (C, H, W) inputs, got {data.input_shape}")
        return build_convnet(data.input_shape, arch.channels, arch.hidden, data.n_classes, rng,
                             dropout=arch.dropout, mu=arch.mu, kernel=arch.kernel)

    def load_dnn(self) -> NetworkSpec:
        return load_network(self.path("dnn.weights"))

    def load_plan(self) -> ConversionPlan:
        try:
            return ConversionPlan.from_dict(read_json(self.path("plan.json")))
        except (KeyError, TypeError, ValueError) as e:
            raise ArtifactError(f"plan.json is malformed: {e}") from e

    def load_snn(self, prefer_finetuned: bool = True) -> Tuple[SpikingNetwork, bool]:
        """The fine-tuned SNN when present (and preferred), else the converted one."""
        tuned = self.path("snn_finetuned.weights")
        if prefer_finetuned and tuned.exists():
            return load_spiking_network(tuned), True
        return load_spiking_network(self.path("snn.weights")), False

    def _check_time_steps(self, snn: SpikingNetwork, plan: ConversionPlan, requested: int) -> None:
        if requested != plan.time_steps or snn.time_steps != plan.time_steps:
            raise MismatchError(
                f"Requested T={requested} but the conversion plan was calibrated for T={plan.time_steps} "
                f"(network records T={snn.time_steps}); re-run calibrate-convert with --time-steps {requested}")

    # ------------------------------------------------------------------
    # Stages
    # ------------------------------------------------------------------

    def train_dnn(self) -> NetworkSpec:
        """Train the source network; writes dnn.weights and the training log."""
        started = time.perf_counter()
        with self.lock():
            train, _ = self.load_data()
            net = self.build_network(train)
            history: List[Dict[str, Any]] = []
            net = train_dnn(net, train, self.config.dnn_training, history=history)
            weights = save_network(self.path("dnn.weights"), net)
            log_json = write_json(self.path("dnn_train_log.json"), {"schema_version": 1, "epochs": history})
            log_csv = write_csv(self.path("dnn_train_log.csv"), _epoch_frame(history, "mu"))
            self._record("train_dnn", started, [weights, log_json, log_csv])
        return net

    def calibrate_convert(self) -> Tuple[SpikingNetwork, ConversionPlan]:
        """Collect activation statistics and convert; writes snn.weights and plan.json."""
        started = time.perf_counter()
        cfg = self.config.conversion
        with self.lock():
            net = self.load_dnn()
            train, _ = self.load_data()
            if train.input_shape != net.input_shape:
                raise ArtifactError(f"dnn.weights expects inputs {net.input_shape}, data has {train.input_shape}")
            stats = collect_activation_stats(net, train, reservoir_size=cfg.reservoir_size,
                                             seed=self.config.seed, max_samples=cfg.calibration_samples)
            snn, plan = convert_dnn_to_snn(net, stats, cfg.time_steps, cfg.mode)
            if cfg.absorb_beta:
                snn = absorb_beta(snn)
            diagnostics = {}
            for index in plan.layers:
                layer = stats[index]
                entry = {"percentile_stability": percentile_stability(layer.samples, layer.mu, self.config.seed)}
                if np.any(layer.samples <= layer.mu):
                    entry["split_calibration"] = split_calibration_diagnostic(
                        layer.samples, layer.mu, cfg.time_steps, self.config.seed)
                diagnostics[str(index)] = entry
                if entry["percentile_stability"] > 0.05:
                    logger.warning("Layer %d: percentile table unstable across halves (gap %.3f of mu)",
                                   index, entry["percentile_stability"])
            landscape = plan_landscape(plan, stats)
            payload = plan.to_dict()
            payload["diagnostics"] = diagnostics
            payload["absorbed_beta"] = cfg.absorb_beta
            payload["landscape"] = plan_landscape(plan, stats, beta_step=20).to_dict(orient="records")
            artifacts = [
                write_json(self.path("stats.json"), stats.to_dict()),
                save_spiking_network(self.path("snn.weights"), snn),
                write_json(self.path("plan.json"), payload),
                write_csv(self.path("plan_landscape.csv"), landscape),
            ]
            stale = self.path("snn_finetuned.weights")
            if stale.exists():
                logger.info("Removing %s from an earlier conversion", stale.name)
                stale.unlink()
                self.manifest.stages.pop("finetune", None)
            self._record("calibrate_convert", started, artifacts)
        return snn, plan

    def finetune(self) -> SpikingNetwork:
        """Surrogate-gradient fine-tuning of the converted SNN."""
        started = time.perf_counter()
        with self.lock():
            plan = self.load_plan()
            snn, _ = self.load_snn(prefer_finetuned=False)
            train, _ = self.load_data()
            history: List[Dict[str, Any]] = []
            tuned = finetune_sgl(snn, train, plan.time_steps, self.config.snn_training, history=history)
            artifacts = [
                save_spiking_network(self.path("snn_finetuned.weights"), tuned),
                write_json(self.path("snn_train_log.json"), {"schema_version": 1, "epochs": history}),
            ]
            self._record("finetune", started, artifacts)
        return tuned

    def evaluate(self, time_steps: Optional[int] = None) -> Dict[str, Any]:
        """
        Accuracy, spiking activity, FLOPs and energy at the calibrated T.

        Raises:
            MismatchError: If ``time_steps`` differs from the plan's T
        """
        started = time.perf_counter()
        with self.lock():
            plan = self.load_plan()
            dnn = self.load_dnn()
            snn, finetuned = self.load_snn()
            T = plan.time_steps if time_steps is None else time_steps
            self._check_time_steps(snn, plan, T)
            _, test = self.load_data()
            sweep = sorted(set(self.config.analysis.time_steps_sweep) | {T})
            curve = [{"T": t, "accuracy": snn_accuracy(snn, test, t)} for t in sweep]
            report, _ = self._cost_report(snn, test, T)
            costs = {c.layer: c for c in report.layers}
            layer_delta = {str(i): estimate_delta_simulated(dnn, snn, test, i, T) for i in snn.spiking_indices()}
            metrics = EvaluationMetrics(
                time_steps=T,
                mode=plan.mode.value,
                finetuned=finetuned,
                dnn_accuracy=accuracy(dnn, test),
                snn_accuracy=next(p["accuracy"] for p in curve if p["T"] == T),
                accuracy_vs_T=curve,
                layers=[{"layer": i, "spikes_per_neuron": c.spikes_per_neuron, "snn_mac": c.snn_mac,
                         "snn_ac": c.snn_ac, "dnn_mac": c.dnn_mac} for i, c in sorted(costs.items())],
                energy_cmos_snn=report.totals["energy_cmos_snn"],
                energy_cmos_dnn=report.totals["energy_cmos_dnn"],
                energy_cmos_dnn_from_layer2=report.totals["energy_cmos_dnn_from_layer2"],
                dnn_snn_energy_ratio=report.totals["dnn_snn_energy_ratio"],
                energy_neuromorphic=report.totals["energy_neuromorphic"],
                layer_delta=layer_delta,
            )
            payload = metrics.model_dump(mode="json")
            artifacts = [
                write_json(self.path("metrics.json"), payload),
                write_json(self.path("metrics.schema.json"), EvaluationMetrics.model_json_schema()),
                write_csv(self.path("accuracy_vs_T.csv"), pd.DataFrame(curve, columns=["T", "accuracy"])),
            ]
            self._record("evaluate", started, artifacts)
        return payload

    def analyze(self) -> Dict[str, Any]:
        """
        K, g, h, h' and Delta estimates for every layer and every T of the sweep.

        Raises:
            InsufficientSamplesError: If a layer yields fewer samples than the floor
        """
        started = time.perf_counter()
        cfg = self.config.analysis
        with self.lock():
            dnn = self.load_dnn()
            snn, _ = self.load_snn(prefer_finetuned=False)
            _, test = self.load_data()
            report = build_error_report(dnn, snn, test, cfg.time_steps_sweep, n_resamples=cfg.n_resamples,
                                        seed=cfg.seed, simulate=cfg.simulate)
            payload = report.to_dict()
            artifacts = [
                write_json(self.path("error_report.json"), payload),
                write_csv(self.path("error_report.csv"), report.to_frame()),
            ]
            self._record("analyze", started, artifacts)
        return payload

    def energy_report(self) -> Dict[str, Any]:
        """Cost report (spikes, FLOPs, energy) and packed spike trace of the SNN on the evaluation subset."""
        started = time.perf_counter()
        with self.lock():
            plan = self.load_plan()
            snn, _ = self.load_snn()
            _, test = self.load_data()
            report, trace = self._cost_report(snn, test, plan.time_steps)
            payload = report.to_dict()
            artifacts = [
                write_json(self.path("cost_report.json"), payload),
                write_csv(self.path("cost_report.csv"), report.to_frame()),
                write_csv(self.path("spike_histogram.csv"), report.spike_histogram),
                write_json(self.path("spike_trace.json"), trace.to_dict()),
            ]
            self._record("energy_report", started, artifacts)
        return payload

    def _cost_report(self, snn: SpikingNetwork, data: Dataset, T: int):
        cfg = self.config.energy
        subset = data.x[:cfg.eval_samples]
        _, trace, _ = snn_forward(snn, subset, T)
        model = EnergyModel(e_mac=cfg.e_mac, e_ac=cfg.e_ac)
        return build_cost_report(snn.network, trace, T, model, cfg.presets), trace

    def run_pipeline(self) -> Dict[str, Any]:
        """Run every stage in order; returns the evaluation metrics."""
        with self.lock():
            self.train_dnn()
            self.calibrate_convert()
            if self.config.snn_training.epochs > 0:
                self.finetune()
            metrics = self.evaluate()
            try:
                self.analyze()
            except InsufficientSamplesError as e:
                logger.warning("Skipping analyze: %s", e)
            self.energy_report()
        return metrics


def _epoch_frame(history: List[Dict[str, Any]], nested: str) -> pd.DataFrame:
    """Flatten per-epoch records, spreading the per-layer mapping into columns."""
    rows = []
    for record in history:
        row = {k: v for k, v in record.items() if not isinstance(v, dict)}
        row.update({f"{nested}_{layer}": value for layer, value in record.get(nested, {}).items()})
        rows.append(row)
    return pd.DataFrame(rows)
