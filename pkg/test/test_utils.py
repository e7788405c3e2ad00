import json

import numpy as np
import pandas as pd
import pytest

from netcore.errors import ArtifactError, ConfigError
from utils.data_loader import (
    Dataset,
    load_idx,
    load_idx_dataset,
    make_arcs,
    make_blobs,
    train_test_split,
    write_idx,
)
from utils.formatter import read_json, sha256_file, write_csv, write_json


class TestIdx:
    def test_image_dataset(self, tmp_path):
        images = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
        write_idx(tmp_path / "images.idx", images)
        write_idx(tmp_path / "labels.idx", np.array([1, 0], dtype=np.uint8))
        data = load_idx_dataset(tmp_path / "images.idx", tmp_path / "labels.idx")
        assert data.input_shape == (1, 3, 3)
        assert data.n_classes == 2
        assert data.x[1, 0, 2, 2] == pytest.approx(17 / 255)

    def test_float_payload_is_big_endian(self, tmp_path):
        path = write_idx(tmp_path / "values.idx", np.array([1.5, -2.0]))
        raw = path.read_bytes()
        assert raw[:4] == bytes([0, 0, 0x0E, 1])
        assert raw[8:16] == np.array([1.5], dtype=">f8").tobytes()
        assert load_idx(path).tolist() == [1.5, -2.0]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_idx(tmp_path / "absent.idx")

    def test_truncated_payload(self, tmp_path):
        path = write_idx(tmp_path / "values.idx", np.arange(4, dtype=np.uint8))
        path.write_bytes(path.read_bytes()[:-1])
        with pytest.raises(ArtifactError):
            load_idx(path)

    def test_not_idx(self, tmp_path):
        path = tmp_path / "junk.idx"
        path.write_bytes(b"\x01\x02\x03\x04")
        with pytest.raises(ArtifactError):
            load_idx(path)


class TestSynthetic:
    @pytest.mark.parametrize("make", [lambda s: make_blobs(300, 3, seed=s), lambda s: make_arcs(300, 3, seed=s)])
    def test_seeded_and_non_negative(self, make):
        a, b = make(5), make(5)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
        assert a.x.min() >= 0.0
        assert np.bincount(a.y).tolist() == [100, 100, 100]

    def test_split(self):
        data = make_blobs(100, 2, seed=1)
        train, test = train_test_split(data, 0.25, seed=2)
        assert (len(train), len(test)) == (75, 25)
        assert sorted(np.concatenate([train.x, test.x])[:, 0]) == sorted(data.x[:, 0])

    def test_split_fraction_range(self):
        with pytest.raises(ConfigError):
            train_test_split(make_blobs(10, 2), 1.0)

    def test_label_count_mismatch(self):
        with pytest.raises(ConfigError):
            Dataset(np.zeros((3, 2)), np.zeros(2), 2)

    def test_batches_cover_every_sample(self):
        data = make_blobs(10, 2)
        seen = np.concatenate([y for _, y in data.batches(3, np.random.default_rng(0))])
        assert sorted(seen) == sorted(data.y)


class TestFormatter:
    def test_json_is_sorted_and_stable(self, tmp_path):
        path = write_json(tmp_path / "a.json", {"b": np.float64(0.5), "a": np.arange(3)})
        assert list(json.loads(path.read_text())) == ["a", "b"]
        digest = sha256_file(path)
        write_json(path, {"a": [0, 1, 2], "b": 0.5})
        assert sha256_file(path) == digest
        assert read_json(path)["a"] == [0, 1, 2]

    def test_read_errors(self, tmp_path):
        with pytest.raises(ArtifactError):
            read_json(tmp_path / "absent.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        with pytest.raises(ArtifactError):
            read_json(bad)

    def test_csv(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", pd.DataFrame({"T": [1, 2], "accuracy": [0.5, 0.75]}))
        assert path.read_text().splitlines() == ["T,accuracy", "1,0.5", "2,0.75"]
