"""IDX reader, synthetic corners, class gap and the dataset cache"""

import gzip
import struct

import numpy as np
import pytest

from dataio.class_gap import class_gap
from dataio.dataset import Dataset
from dataio.dataset_cache import (deserialize_dataset, load_dataset, save_dataset,
                                  serialize_dataset)
from dataio.idx_format import load_idx, read_idx_labels, write_idx
from dataio.synthetic import corner_bits, synth_corners
from numcore.rng import Rng
from utils.errors import (CapacityError, ConsistencyError, DataError, FormatError, LabelError,
                          ParameterError, TruncationError, UndefinedGapError)

PIXELS = [0, 255, 128, 64, 1, 2, 3, 4]


def image_bytes(n=2, rows=2, cols=2, pixels=PIXELS, magic=0x00000803):
    return struct.pack(">IIII", magic, n, rows, cols) + bytes(pixels)


def label_bytes(labels=(3, 7), magic=0x00000801):
    return struct.pack(">II", magic, len(labels)) + bytes(labels)


@pytest.fixture
def idx_pair(tmp_path):
    images = tmp_path / "images.idx"
    labels = tmp_path / "labels.idx"
    images.write_bytes(image_bytes())
    labels.write_bytes(label_bytes())
    return images, labels


def brute_force_gap(values, labels):
    best = np.inf
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            if labels[i] != labels[j]:
                best = min(best, float(np.max(np.abs(values[i] - values[j]))))
    return best


class TestIdx:

    def test_valid_pair(self, idx_pair):
        ds = load_idx(*idx_pair)
        assert ds.n == 2 and ds.d == 4 and ds.k == 8
        assert ds.image_shape == (2, 2, 1)
        np.testing.assert_array_equal(ds.raw[0], [0, 255, 128, 64])
        np.testing.assert_array_equal(ds.features, ds.raw / 255.0)
        np.testing.assert_array_equal(ds.labels, [3, 7])
        assert ds.features.min() >= 0 and ds.features.max() <= 1

    def test_explicit_class_count(self, idx_pair):
        assert load_idx(*idx_pair, k=10).k == 10
        with pytest.raises(LabelError):
            load_idx(*idx_pair, k=5)

    def test_bad_magic(self, tmp_path, idx_pair):
        bad = tmp_path / "bad.idx"
        bad.write_bytes(image_bytes(magic=0x00000801))
        with pytest.raises(FormatError):
            load_idx(bad, idx_pair[1])

    def test_count_mismatch(self, tmp_path, idx_pair):
        labels = tmp_path / "three.idx"
        labels.write_bytes(label_bytes((1, 2, 3)))
        with pytest.raises(ConsistencyError):
            load_idx(idx_pair[0], labels)

    def test_truncated_payload(self, tmp_path, idx_pair):
        short = tmp_path / "short.idx"
        short.write_bytes(image_bytes()[:-1])
        with pytest.raises(TruncationError):
            load_idx(short, idx_pair[1])
        header = tmp_path / "header.idx"
        header.write_bytes(image_bytes()[:10])
        with pytest.raises(TruncationError):
            load_idx(header, idx_pair[1])

    def test_trailing_bytes(self, tmp_path):
        labels = tmp_path / "long.idx"
        labels.write_bytes(label_bytes() + b"\x00")
        with pytest.raises(ConsistencyError):
            read_idx_labels(labels)

    def test_gzip(self, tmp_path, idx_pair):
        packed = tmp_path / "images.idx.gz"
        with gzip.open(packed, "wb") as f:
            f.write(image_bytes())
        np.testing.assert_array_equal(load_idx(packed, idx_pair[1]).raw, load_idx(*idx_pair).raw)

    def test_missing_file_names_path(self, tmp_path, idx_pair):
        missing = tmp_path / "nowhere.idx"
        with pytest.raises(DataError) as exc:
            load_idx(missing, idx_pair[1])
        assert str(missing) in str(exc.value)

    def test_write_then_read(self, tmp_path):
        images = np.arange(3 * 4 * 5, dtype=np.uint8).reshape(3, 4, 5)
        write_idx(images, [0, 1, 1], tmp_path / "i.idx", tmp_path / "l.idx")
        ds = load_idx(tmp_path / "i.idx", tmp_path / "l.idx")
        np.testing.assert_array_equal(ds.raw, images.reshape(3, 20))


class TestDataset:

    def test_rejects_out_of_range_features(self):
        with pytest.raises(DataError):
            Dataset(np.array([[1.5]]), [0], 1)

    def test_head_and_subset(self):
        ds = synth_corners(2, 3, 0.5, 5, seed=0)
        assert ds.head(0) is ds
        assert ds.head(3).n == 3
        np.testing.assert_array_equal(ds.subset([9, 0]).labels, [1, 0])


class TestSynthCorners:

    def test_counts_and_determinism(self):
        ds = synth_corners(2, 2, 0.5, 50, seed=3)
        assert ds.n == 100
        again = synth_corners(2, 2, 0.5, 50, seed=3)
        assert ds.features.tobytes() == again.features.tobytes()
        np.testing.assert_array_equal(ds.labels, again.labels)

    def test_gap_is_guaranteed(self):
        for k, d, gap in ((2, 2, 0.5), (4, 6, 0.3), (8, 3, 0.7)):
            ds = synth_corners(k, d, gap, 30, seed=k)
            assert class_gap(ds) >= gap

    def test_corners_are_distinct(self):
        bits = corner_bits(5, 6)
        assert len({tuple(row) for row in bits}) == 5

    def test_capacity(self):
        with pytest.raises(CapacityError):
            synth_corners(5, 2, 0.5, 10)

    def test_gap_range(self):
        with pytest.raises(ParameterError):
            synth_corners(2, 2, 1.0, 10)
        with pytest.raises(ParameterError):
            synth_corners(2, 2, 0.0, 10)


class TestClassGap:

    def test_duplicate_with_two_labels(self):
        ds = Dataset.from_raw([[10, 20], [10, 20]], [0, 1], 2)
        assert class_gap(ds) == 0.0

    def test_single_pixel_difference(self):
        ds = Dataset.from_raw([[40], [228]], [0, 1], 2)
        assert class_gap(ds) == 188.0
        assert class_gap(ds, units="features") == pytest.approx(188 / 255)

    def test_matches_brute_force(self):
        rng = Rng(4)
        raw = (rng.uniform_array((150, 70)) * 256).astype(np.uint8)
        labels = np.array([rng.randint(3) for _ in range(150)])
        ds = Dataset.from_raw(raw, labels, 3)
        assert class_gap(ds, limit=None) == brute_force_gap(raw.astype(np.int64), labels)
        assert class_gap(ds, limit=None, threads=4) == class_gap(ds, limit=None)

    def test_limit_and_order(self):
        rng = Rng(5)
        raw = (rng.uniform_array((200, 10)) * 256).astype(np.uint8)
        labels = np.arange(200) % 2
        ds = Dataset.from_raw(raw, labels, 2)
        gaps = [class_gap(ds, limit=limit) for limit in (20, 50, 100, 200)]
        assert gaps == sorted(gaps, reverse=True)
        flipped = Dataset.from_raw(raw[::-1], labels[::-1], 2)
        assert class_gap(flipped, limit=None) == class_gap(ds, limit=None)

    def test_errors(self):
        with pytest.raises(UndefinedGapError):
            class_gap(Dataset.from_raw([[1], [2]], [0, 0], 2))
        features_only = synth_corners(2, 2, 0.5, 5)
        with pytest.raises(ParameterError):
            class_gap(features_only, units="raw")
        with pytest.raises(ParameterError):
            class_gap(features_only, units="pixels")


class TestDatasetCache:

    def test_round_trip(self, tmp_path):
        ds = Dataset.from_raw(np.arange(12, dtype=np.uint8).reshape(3, 4) * 20, [0, 1, 2], 3,
                              name="tiny", image_shape=(2, 2, 1))
        path = tmp_path / "tiny.data"
        save_dataset(ds, str(path))
        loaded = load_dataset(str(path))
        assert loaded.features.tobytes() == ds.features.tobytes()
        np.testing.assert_array_equal(loaded.raw, ds.raw)
        np.testing.assert_array_equal(loaded.labels, ds.labels)
        assert (loaded.k, loaded.name, loaded.image_shape) == (3, "tiny", (2, 2, 1))

    def test_corruption(self):
        blob = serialize_dataset(synth_corners(2, 3, 0.5, 4))
        with pytest.raises(FormatError):
            deserialize_dataset(b"XXXX" + blob[4:])
        flipped = bytearray(blob)
        flipped[-10] ^= 0x01
        with pytest.raises(ConsistencyError):
            deserialize_dataset(bytes(flipped))
        with pytest.raises(TruncationError):
            deserialize_dataset(blob[:-20])

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_dataset(str(tmp_path / "absent.data"))
