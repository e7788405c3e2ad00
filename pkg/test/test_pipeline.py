import json

import pytest

from main import run
from netcore.errors import ArtifactError, ConfigError
from pipeline.config import ExperimentConfig, apply_overrides, load_config
from pipeline.runner import ExperimentRunner
from pipeline.schemas import EvaluationMetrics
from snn.network import SpikeTrace
from utils.formatter import read_json, sha256_file


def small_config(n_samples=4000):
    return {
        "name": "pipeline_test",
        "dataset": {"source": "blobs", "n_samples": n_samples, "n_classes": 4, "spread": 0.3,
                    "test_fraction": 0.2},
        "architecture": {"kind": "mlp", "hidden": [16, 16]},
        "dnn_training": {"epochs": 5, "learning_rate": 0.05, "momentum": 0.5},
        "snn_training": {"epochs": 1, "learning_rate": 0.005, "seed": 1},
        "conversion": {"time_steps": 2},
        "analysis": {"time_steps_sweep": [1, 2], "n_resamples": 10},
        "energy": {"eval_samples": 64},
    }


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    config = write_config(root, small_config())
    run_dir = root / "run"
    assert run(["pipeline", "--config", str(config), "--output-dir", str(run_dir)]) == 0
    return config, run_dir


class TestPipeline:
    def test_artifacts_written(self, finished_run):
        _, run_dir = finished_run
        for name in ("dnn.weights", "snn.weights", "snn_finetuned.weights", "plan.json", "metrics.json",
                     "error_report.json", "cost_report.json", "spike_trace.json",
                     "manifest.json", "config.json"):
            assert (run_dir / name).exists(), name
        assert not (run_dir / "run.lock").exists()

    def test_manifest_checksums_hold(self, finished_run):
        config, run_dir = finished_run
        runner = ExperimentRunner(apply_overrides(load_config(config), output_dir=run_dir), echo=False)
        assert runner.verify_manifest() == []
        assert set(runner.manifest.stages) >= {"train_dnn", "calibrate_convert", "finetune", "evaluate",
                                               "analyze", "energy_report"}

    def test_metrics_match_schema(self, finished_run):
        _, run_dir = finished_run
        metrics = EvaluationMetrics.model_validate(read_json(run_dir / "metrics.json"))
        assert metrics.time_steps == 2
        assert metrics.finetuned
        assert [p.T for p in metrics.accuracy_vs_T] == [1, 2]
        assert metrics.dnn_accuracy > 0.5

    def test_spike_trace_recorded(self, finished_run):
        config, run_dir = finished_run
        trace = SpikeTrace.from_dict(read_json(run_dir / "spike_trace.json"))
        assert trace.T == 2
        assert trace.batch_size == 64
        runner = ExperimentRunner(apply_overrides(load_config(config), output_dir=run_dir), echo=False)
        assert "spike_trace.json" in runner.manifest.stages["energy_report"].artifacts

    def test_evaluate_is_repeatable(self, finished_run):
        config, run_dir = finished_run
        before = (run_dir / "metrics.json").read_bytes()
        assert run(["evaluate", "--config", str(config), "--output-dir", str(run_dir)]) == 0
        assert (run_dir / "metrics.json").read_bytes() == before

    def test_evaluate_at_other_T_is_a_mismatch(self, finished_run):
        config, run_dir = finished_run
        assert run(["evaluate", "--config", str(config), "--output-dir", str(run_dir), "--time-steps", "3"]) == 5

    def test_corrupted_weights_rejected(self, finished_run, tmp_path):
        config, _ = finished_run
        run_dir = tmp_path / "run"
        assert run(["train-dnn", "--config", str(config), "--output-dir", str(run_dir)]) == 0
        weights = run_dir / "dnn.weights"
        data = bytearray(weights.read_bytes())
        data[40] ^= 0xFF
        weights.write_bytes(bytes(data))
        assert run(["calibrate-convert", "--config", str(config), "--output-dir", str(run_dir)]) == 4


def test_same_seed_same_weights(tmp_path):
    config = write_config(tmp_path, small_config(n_samples=400))
    digests = []
    for name in ("a", "b"):
        run_dir = tmp_path / name
        assert run(["train-dnn", "--config", str(config), "--output-dir", str(run_dir), "--seed", "7"]) == 0
        digests.append(sha256_file(run_dir / "dnn.weights"))
    assert digests[0] == digests[1]


def test_naive_mode_records_unit_beta(tmp_path):
    config = write_config(tmp_path, small_config(n_samples=400))
    run_dir = tmp_path / "run"
    assert run(["train-dnn", "--config", str(config), "--output-dir", str(run_dir)]) == 0
    assert run(["calibrate-convert", "--config", str(config), "--output-dir", str(run_dir),
                "--mode", "naive"]) == 0
    plan = read_json(run_dir / "plan.json")
    assert plan["mode"] == "naive"
    assert plan["layers"] and all(layer["beta"] == 1.0 for layer in plan["layers"])


def test_analyze_with_too_few_samples(tmp_path):
    # 120 test samples x 16 neurons stays below the estimator floor
    config = write_config(tmp_path, small_config(n_samples=600))
    run_dir = tmp_path / "run"
    assert run(["train-dnn", "--config", str(config), "--output-dir", str(run_dir)]) == 0
    assert run(["calibrate-convert", "--config", str(config), "--output-dir", str(run_dir)]) == 0
    assert run(["analyze", "--config", str(config), "--output-dir", str(run_dir)]) == 6


def test_diverging_training_exits_3(tmp_path):
    payload = small_config(n_samples=400)
    payload["architecture"]["mu"] = 1e300
    payload["dnn_training"]["learning_rate"] = 1e300
    assert run(["train-dnn", "--config", str(write_config(tmp_path, payload)),
                "--output-dir", str(tmp_path / "run")]) == 3


def test_reconversion_drops_finetuned_snn(tmp_path):
    config = write_config(tmp_path, small_config(n_samples=400))
    run_dir = tmp_path / "run"
    for stage in ("train-dnn", "calibrate-convert", "finetune", "calibrate-convert"):
        assert run([stage, "--config", str(config), "--output-dir", str(run_dir)]) == 0, stage
    assert not (run_dir / "snn_finetuned.weights").exists()
    runner = ExperimentRunner(apply_overrides(load_config(config), output_dir=run_dir), echo=False)
    assert "finetune" not in runner.manifest.stages
    assert runner.verify_manifest() == []


class TestRunLock:
    @pytest.fixture
    def config(self, tmp_path):
        return apply_overrides(load_config(write_config(tmp_path, small_config(n_samples=400))),
                               output_dir=tmp_path / "run")

    def test_second_runner_is_refused(self, config):
        owner = ExperimentRunner(config, echo=False)
        rival = ExperimentRunner(config, echo=False)
        with owner.lock():
            with pytest.raises(ArtifactError, match="locked"):
                with rival.lock():
                    pass
        assert not owner.path("run.lock").exists()
        with rival.lock():
            assert rival.path("run.lock").exists()

    def test_nested_lock_keeps_directory(self, config):
        runner = ExperimentRunner(config, echo=False)
        with runner.lock():
            with runner.lock():
                pass
            assert runner.path("run.lock").exists()
        assert not runner.path("run.lock").exists()

    def test_pipeline_holds_lock_between_stages(self, config, monkeypatch):
        runner = ExperimentRunner(config, echo=False)
        original = runner.finetune
        refused = []

        def finetune_with_rival():
            try:
                with ExperimentRunner(config, echo=False).lock():
                    pass
            except ArtifactError:
                refused.append(True)
            return original()

        monkeypatch.setattr(runner, "finetune", finetune_with_rival)
        runner.run_pipeline()
        assert refused == [True]
        assert not runner.path("run.lock").exists()


class TestConfig:
    def test_unknown_key(self, tmp_path):
        payload = small_config()
        payload["conversion"]["threshold"] = 0.5
        assert run(["train-dnn", "--config", str(write_config(tmp_path, payload)),
                    "--output-dir", str(tmp_path / "run")]) == 2

    def test_missing_idx_file(self, tmp_path):
        payload = small_config()
        payload["dataset"] = {"source": "idx", "images_path": str(tmp_path / "missing-images.idx"),
                              "labels_path": str(tmp_path / "missing-labels.idx")}
        assert run(["train-dnn", "--config", str(write_config(tmp_path, payload)),
                    "--output-dir", str(tmp_path / "run")]) == 2

    def test_missing_config_file(self, tmp_path):
        assert run(["train-dnn", "--config", str(tmp_path / "nope.json")]) == 2

    def test_mac_must_cost_more_than_ac(self, tmp_path):
        payload = small_config()
        payload["energy"].update(e_mac=0.1, e_ac=0.2)
        with pytest.raises(ConfigError, match="e_mac"):
            load_config(write_config(tmp_path, payload))

    def test_overrides_take_precedence(self, tmp_path):
        cfg = load_config(write_config(tmp_path, small_config()))
        out = apply_overrides(cfg, time_steps=4, mode="naive", seed=9, epochs=2, output_dir=tmp_path)
        assert out.conversion.time_steps == 4
        assert out.conversion.mode.value == "naive"
        assert (out.seed, out.dataset.seed, out.dnn_training.seed, out.snn_training.seed) == (9, 9, 9, 10)
        assert out.dnn_training.epochs == 2
        assert out.output_dir == tmp_path
        assert cfg.conversion.time_steps == 2

    def test_bad_override_is_a_config_error(self):
        with pytest.raises(ConfigError):
            apply_overrides(ExperimentConfig(), time_steps=0)

    def test_hash_ignores_key_order(self, tmp_path):
        payload = small_config()
        reordered = dict(reversed(list(payload.items())))
        a = load_config(write_config(tmp_path, payload, "a.json"))
        b = load_config(write_config(tmp_path, reordered, "b.json"))
        assert a.config_hash() == b.config_hash()
