import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import DATA_DIR
from plm.data import (
    Dataset75,
    export_image_pgm,
    load_idx_images,
    one_hot,
    read_pgm,
    resolve_images_file,
    split_groups,
    to_bytes,
    vectorize,
    write_idx_images,
    zero_mean,
)
from plm.errors import FormatError, RangeError

IDX_FILE = DATA_DIR / "train-images-idx3-ubyte"


class TestIdx:
    def test_header(self):
        magic, n, rows, cols = struct.unpack(">IIII", IDX_FILE.read_bytes()[:16])
        assert (magic, rows, cols) == (2051, 28, 28)
        assert n >= 75

    def test_first_75_match_raw_offsets(self):
        raw = IDX_FILE.read_bytes()
        images = load_idx_images(IDX_FILE, 75)
        assert len(images) == 75
        assert b"".join(img.tobytes() for img in images) == raw[16:16 + 75 * 784]
        assert images[3].tobytes() == raw[16 + 3 * 784:16 + 4 * 784]

    def test_directory_and_gzip_inputs(self, tmp_path):
        import gzip

        gz = tmp_path / "train-images-idx3-ubyte.gz"
        gz.write_bytes(gzip.compress(IDX_FILE.read_bytes()))
        assert resolve_images_file(tmp_path) == gz
        a = load_idx_images(tmp_path, 5)
        b = load_idx_images(IDX_FILE, 5)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_zero_magic_is_format_error(self, tmp_path):
        bad = tmp_path / "bad"
        bad.write_bytes(b"\x00" * 4 + IDX_FILE.read_bytes()[4:])
        with pytest.raises(FormatError):
            load_idx_images(bad, 75)

    def test_wrong_geometry(self, tmp_path):
        bad = tmp_path / "bad"
        bad.write_bytes(struct.pack(">IIII", 2051, 1, 27, 28) + bytes(27 * 28))
        with pytest.raises(FormatError):
            load_idx_images(bad, 1)

    def test_truncated_payload(self, tmp_path):
        bad = tmp_path / "bad"
        bad.write_bytes(IDX_FILE.read_bytes()[: 16 + 10 * 784])
        with pytest.raises(OSError):
            load_idx_images(bad, 75)

    def test_count_beyond_header(self, tmp_path):
        path = tmp_path / "few"
        write_idx_images(np.zeros((3, 28, 28), dtype=np.uint8), path)
        with pytest.raises(RangeError):
            load_idx_images(path, 4)

    def test_write_roundtrip(self, tmp_path):
        imgs = np.random.default_rng(0).integers(0, 256, size=(4, 28, 28), dtype=np.uint8)
        write_idx_images(imgs, tmp_path / "x")
        back = load_idx_images(tmp_path / "x", 4)
        assert np.array_equal(np.stack(back), imgs)


class TestVectorize:
    def test_black(self):
        assert np.array_equal(vectorize(np.zeros((28, 28), dtype=np.uint8)), np.zeros(784))

    def test_scaling(self):
        raw = np.zeros((28, 28), dtype=np.uint8)
        raw[0, 0], raw[0, 1] = 255, 51
        v = vectorize(raw)
        assert v[0] == 1.0 and v[1] == pytest.approx(0.2, abs=1e-15)

    def test_row_major(self):
        raw = np.zeros((28, 28), dtype=np.uint8)
        raw[5, 17] = 255
        assert np.flatnonzero(vectorize(raw)).tolist() == [28 * 5 + 17]


class TestZeroMean:
    def test_constant(self):
        assert np.max(np.abs(zero_mean(np.full(784, 0.3)))) <= 1e-12
        assert np.array_equal(zero_mean(np.full(784, 0.5)), np.zeros(784))

    def test_hand_pair(self):
        np.testing.assert_array_equal(zero_mean(np.array([0.0, 1.0])), [-0.5, 0.5])

    def test_random_vectors(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            assert abs(zero_mean(rng.random(784)).mean()) <= 1e-12

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, 784, elements=st.floats(0, 1)))
    def test_idempotent(self, v):
        once = zero_mean(v)
        assert np.max(np.abs(zero_mean(once) - once)) <= 1e-12


class TestOneHot:
    def test_ends(self):
        assert one_hot(0)[0] == 1.0 and one_hot(0).sum() == 1.0
        assert one_hot(74)[74] == 1.0 and one_hot(74).shape == (75,)

    @pytest.mark.parametrize("c", [-1, 75])
    def test_out_of_range(self, c):
        with pytest.raises(RangeError):
            one_hot(c)


class TestSplitGroups:
    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_partition(self, seed):
        g = split_groups(seed)
        sizes = [len(g.members(k)) for k in (1, 2, 3)]
        assert sizes == [25, 25, 25]
        assert sorted(np.concatenate([g.members(k) for k in (1, 2, 3)]).tolist()) == list(range(75))

    def test_deterministic(self):
        assert split_groups(0) == split_groups(0)

    def test_seeds_differ(self):
        assert split_groups(0).group_of != split_groups(1).group_of


class TestPgm:
    def test_black_payload(self, tmp_path):
        export_image_pgm(np.zeros(784), tmp_path / "a.pgm")
        raw = (tmp_path / "a.pgm").read_bytes()
        assert raw.startswith(b"P5\n28 28\n255\n")
        assert raw[-784:] == bytes(784) and len(raw) == len(b"P5\n28 28\n255\n") + 784

    def test_clamp_and_scale(self):
        assert to_bytes(np.array([1.0, -0.2, 1.7, 0.5])).tolist() == [255, 0, 255, 128]

    def test_roundtrip_original_digit(self, tmp_path, dataset):
        v = dataset.images[0]
        export_image_pgm(v, tmp_path / "d.pgm")
        assert np.max(np.abs(read_pgm(tmp_path / "d.pgm") - v)) <= 1 / 255


def test_dataset75_shape(dataset):
    assert len(dataset) == 75 and dataset.images.shape == (75, 784)
    assert dataset.images.min() >= 0.0 and dataset.images.max() <= 1.0
    with pytest.raises(ValueError):
        Dataset75(np.zeros((74, 784)))
