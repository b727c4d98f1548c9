import struct

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from rbcover import DataError, DataMatrix, FormatError, gen_synthetic, load_matrix, random_project, save_matrix


@pytest.fixture
def random_matrix():
    rng = np.random.default_rng(3)
    return DataMatrix((rng.random((100, 8), dtype=np.float32) - 0.5) * 100)


class TestFileFormats:
    def test_binary_roundtrip_bit_exact(self, tmp_path, random_matrix):
        path = tmp_path / "m.rbcm"
        save_matrix(random_matrix, path, "binary")
        back = load_matrix(path, "binary")
        assert back.n == 100 and back.d == 8
        assert np.array_equal(back.values, random_matrix.values)

    def test_csv_roundtrip(self, tmp_path, random_matrix):
        path = tmp_path / "m.csv"
        save_matrix(random_matrix, path, "csv")
        back = load_matrix(path, "csv")
        # 9 significant digits recover float32 exactly
        assert np.array_equal(back.values, random_matrix.values)

    def test_csv_decode_example(self, tmp_path):
        path = tmp_path / "two.csv"
        path.write_text("1.0,2.0\n3.0,4.0\n")
        m = load_matrix(path, "csv")
        assert m.n == 2 and m.d == 2
        assert np.array_equal(m.values, np.array([[1, 2], [3, 4]], dtype=np.float32))

    def test_binary_decode_example(self, tmp_path):
        path = tmp_path / "two.rbcm"
        payload = b"RBCM" + struct.pack("<III", 1, 2, 2) + np.array([0, 0, 3, 4], dtype="<f4").tobytes()
        path.write_bytes(payload)
        m = load_matrix(path, "binary")
        assert m.n == 2 and m.d == 2

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.rbcm"
        path.write_bytes(b"NOPE" + b"\x00" * 12)
        with pytest.raises(FormatError):
            load_matrix(path, "binary")

    def test_truncated_file(self, tmp_path, random_matrix):
        path = tmp_path / "m.rbcm"
        save_matrix(random_matrix, path, "binary")
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(OSError):
            load_matrix(path, "binary")

    def test_non_finite_value_rejected(self, tmp_path):
        path = tmp_path / "nan.rbcm"
        payload = b"RBCM" + struct.pack("<III", 1, 1, 2) + np.array([1.0, np.nan], dtype="<f4").tobytes()
        path.write_bytes(payload)
        with pytest.raises(DataError):
            load_matrix(path, "binary")

    def test_unwritable_path(self, tmp_path, random_matrix):
        with pytest.raises(OSError):
            save_matrix(random_matrix, tmp_path / "missing" / "m.rbcm", "binary")

    def test_unknown_format(self, tmp_path, random_matrix):
        with pytest.raises(ValueError):
            save_matrix(random_matrix, tmp_path / "m.x", "parquet")


class TestDataMatrix:
    def test_requires_2d_nonempty(self):
        with pytest.raises(ValueError):
            DataMatrix(np.zeros(3, dtype=np.float32))
        with pytest.raises(ValueError):
            DataMatrix(np.zeros((0, 3), dtype=np.float32))

    def test_rejects_non_finite(self):
        with pytest.raises(DataError):
            DataMatrix(np.array([[np.inf]], dtype=np.float32))

    def test_values_are_read_only(self, random_matrix):
        with pytest.raises(ValueError):
            random_matrix.values[0, 0] = 1.0


class TestGenerators:
    def test_grid_3x3(self):
        m = gen_synthetic("grid", 9, 2, seed=0)
        expected = {(float(i), float(j)) for i in range(3) for j in range(3)}
        assert {tuple(row) for row in m.values.tolist()} == expected

    def test_grid_requires_perfect_power(self):
        with pytest.raises(ValueError):
            gen_synthetic("grid", 10, 2, seed=0)

    def test_grid_large_side_exact(self):
        # fp d-th roots must not break the perfect-power check
        m = gen_synthetic("grid", 50 * 50, 2, seed=0)
        assert m.n == 2500

    def test_uniform_deterministic_and_in_range(self):
        a = gen_synthetic("uniform", 10_000, 8, seed=11)
        b = gen_synthetic("uniform", 10_000, 8, seed=11)
        assert np.array_equal(a.values, b.values)
        assert a.values.min() >= 0.0 and a.values.max() < 1.0

    def test_different_seed_differs(self):
        a = gen_synthetic("uniform", 100, 4, seed=1)
        b = gen_synthetic("uniform", 100, 4, seed=2)
        assert not np.array_equal(a.values, b.values)

    def test_clusters_shape_and_determinism(self):
        a = gen_synthetic("clusters", 500, 6, seed=3, n_clusters=5, cluster_sigma=0.01)
        b = gen_synthetic("clusters", 500, 6, seed=3, n_clusters=5, cluster_sigma=0.01)
        assert a.n == 500 and a.d == 6
        assert np.array_equal(a.values, b.values)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            gen_synthetic("swirl", 10, 2, seed=0)


class TestRandomProject:
    def test_identity_hook(self):
        rng = np.random.default_rng(4)
        m = DataMatrix(rng.random((50, 6), dtype=np.float32))
        out = random_project(m, 6, seed=0, projection=np.eye(6))
        np.testing.assert_allclose(out.values, m.values / np.sqrt(6), rtol=1e-6)

    def test_output_shape(self):
        rng = np.random.default_rng(5)
        m = DataMatrix(rng.random((200, 74), dtype=np.float32))
        out = random_project(m, 16, seed=0)
        assert out.n == 200 and out.d == 16

    def test_rejects_bad_target_dim(self):
        m = DataMatrix(np.ones((4, 8), dtype=np.float32))
        with pytest.raises(ValueError):
            random_project(m, 9, seed=0)
        with pytest.raises(ValueError):
            random_project(m, 0, seed=0)

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(6)
        m = DataMatrix(rng.random((30, 20), dtype=np.float32))
        a = random_project(m, 5, seed=77)
        b = random_project(m, 5, seed=77)
        assert np.array_equal(a.values, b.values)

    def test_linearity_power_of_two_scale_is_exact(self):
        rng = np.random.default_rng(7)
        x = rng.random((30, 20), dtype=np.float32)
        a = random_project(DataMatrix(2.0 * x), 5, seed=9)
        b = random_project(DataMatrix(x), 5, seed=9)
        assert np.array_equal(a.values, 2.0 * b.values)

    def test_linearity_general_scale(self):
        rng = np.random.default_rng(8)
        x = rng.random((30, 20), dtype=np.float32)
        a = random_project(DataMatrix(np.float32(1.7) * x), 5, seed=9)
        b = random_project(DataMatrix(x), 5, seed=9)
        np.testing.assert_allclose(a.values, 1.7 * b.values, rtol=1e-5)

    def test_distances_approximately_preserved(self):
        # Johnson-Lindenstrauss-style concentration at k=24 keeps >=90% of
        # sampled pair distances within (1 +/- 0.35) of the original.
        rng = np.random.default_rng(12)
        n, d, k = 2000, 64, 24
        m = DataMatrix(rng.random((n, d), dtype=np.float32))
        out = random_project(m, k, seed=21)
        i = rng.integers(n, size=10_000)
        j = rng.integers(n, size=10_000)
        keep = i != j
        i, j = i[keep], j[keep]
        orig = np.linalg.norm(m.values[i].astype(np.float64) - m.values[j].astype(np.float64), axis=1)
        proj = np.linalg.norm(out.values[i].astype(np.float64) - out.values[j].astype(np.float64), axis=1)
        ratio = proj / orig
        frac = np.mean((ratio >= 0.65) & (ratio <= 1.35))
        assert frac >= 0.90, f"only {frac:.3f} of pairs within the band"
