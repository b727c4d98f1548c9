import math

import numpy as np
import pytest

import rbcover.rbc as rbc_mod
from rbcover import (
    BERNOULLI,
    FIXED_COUNT,
    DataMatrix,
    FormatError,
    MetricSpec,
    build_exact,
    build_one_shot,
    distance_rows,
    load_index,
    one_shot_params,
    sample_representatives,
    save_index,
    standard_params_exact,
)


class TestSampling:
    def test_all_selected_when_nr_equals_n(self):
        for mode in (BERNOULLI, FIXED_COUNT):
            reps = sample_representatives(50, 50, seed=1, mode=mode)
            assert reps.rep_ids.tolist() == list(range(50))

    def test_fixed_count_exact_size(self):
        reps = sample_representatives(1000, 50, seed=2, mode=FIXED_COUNT)
        assert reps.size == 50
        assert len(set(reps.rep_ids.tolist())) == 50
        assert np.all(np.diff(reps.rep_ids) > 0)

    def test_bernoulli_mean_size(self):
        # binomial std of ~31.5 puts the mean of 100 draws well inside +/-100
        sizes = [sample_representatives(100_000, 1000, seed=s, mode=BERNOULLI).size for s in range(100)]
        assert abs(np.mean(sizes) - 1000) <= 100

    def test_deterministic_per_seed(self):
        a = sample_representatives(500, 40, seed=9, mode=BERNOULLI)
        b = sample_representatives(500, 40, seed=9, mode=BERNOULLI)
        assert np.array_equal(a.rep_ids, b.rep_ids)

    def test_empty_draw_retries_then_fails(self, monkeypatch):
        calls = []

        def always_empty(n, p, seed):
            calls.append(seed)
            return np.array([], dtype=np.int64)

        monkeypatch.setattr(rbc_mod, "_bernoulli_draw", always_empty)
        with pytest.raises(ValueError):
            sample_representatives(10, 1, seed=5, mode=BERNOULLI)
        assert calls == [5, 6]

    def test_empty_draw_retry_succeeds(self, monkeypatch):
        real = rbc_mod._bernoulli_draw

        def first_empty(n, p, seed):
            if seed == 5:
                return np.array([], dtype=np.int64)
            return real(n, p, seed)

        monkeypatch.setattr(rbc_mod, "_bernoulli_draw", first_empty)
        reps = sample_representatives(100, 10, seed=5, mode=BERNOULLI)
        assert reps.size > 0

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            sample_representatives(10, 0, seed=0)
        with pytest.raises(ValueError):
            sample_representatives(10, 11, seed=0)
        with pytest.raises(ValueError):
            sample_representatives(10, 5, seed=0, mode="poisson")
        with pytest.raises(ValueError):
            sample_representatives(10, 5, seed=-1)


class TestBuildExact:
    def test_forced_reps_line_example(self, line_points, spec1):
        idx = build_exact(line_points, 2, spec1, seed=0, rep_ids=[1, 3])
        assert idx.list_ids[0].tolist() == [1, 0]
        assert idx.list_dists[0].tolist() == [0.0, 2.0]
        assert idx.radii[0] == 2.0
        assert idx.list_ids[1].tolist() == [3, 2, 4]
        assert idx.list_dists[1].tolist() == [0.0, 1.0, 3.0]
        assert idx.radii[1] == 3.0

    def test_every_point_owns_itself_when_all_reps(self, uniform8, spec8):
        idx = build_exact(uniform8, uniform8.n, spec8, seed=0)
        assert all(ids.tolist() == [pos] for pos, ids in enumerate(idx.list_ids))
        assert np.all(idx.radii == 0.0)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_partition_law(self, uniform8, spec8, seed):
        idx = build_exact(uniform8, 50, spec8, seed=seed)
        merged = np.concatenate(idx.list_ids)
        assert np.array_equal(np.sort(merged), np.arange(uniform8.n))

    def test_lists_sorted_and_radii_consistent(self, uniform8, spec8):
        idx = build_exact(uniform8, 40, spec8, seed=3)
        for pos, (ids, dists, radius) in enumerate(zip(idx.list_ids, idx.list_dists, idx.radii)):
            assert np.all(np.diff(dists) >= 0)
            if len(dists):
                assert dists[-1] == radius
            rep_point = uniform8.values[idx.reps.rep_ids[pos]][None, :]
            recomputed = distance_rows(uniform8.values[ids], rep_point, spec8)[:, 0]
            assert np.array_equal(recomputed, dists)
        # spot-check nearest-rep assignment for 100 random points
        rng = np.random.default_rng(0)
        rep_matrix = idx.rep_points
        owner = idx.owner_positions()
        for pid in rng.integers(uniform8.n, size=100):
            dists_to_reps = distance_rows(uniform8.values[pid][None, :], rep_matrix, spec8)[0]
            best = dists_to_reps.min()
            assigned = owner[pid]
            assert dists_to_reps[assigned] == best
            # ties break to the lowest rep id = lowest position (rep ids ascending)
            assert assigned == int(np.flatnonzero(dists_to_reps == best)[0])

    def test_rep_in_own_list_at_zero(self, uniform8, spec8):
        idx = build_exact(uniform8, 30, spec8, seed=4)
        for pos, (ids, dists) in enumerate(zip(idx.list_ids, idx.list_dists)):
            assert ids[0] == idx.reps.rep_ids[pos]
            assert dists[0] == 0.0

    def test_build_deterministic(self, uniform8, spec8):
        a = build_exact(uniform8, 40, spec8, seed=5)
        b = build_exact(uniform8, 40, spec8, seed=5)
        assert np.array_equal(a.reps.rep_ids, b.reps.rep_ids)
        assert all(np.array_equal(x, y) for x, y in zip(a.list_ids, b.list_ids))
        assert np.array_equal(a.radii, b.radii)


class TestBuildOneShot:
    def test_forced_reps_line_example(self, line_points, spec1):
        idx = build_one_shot(line_points, 2, 3, spec1, seed=0, rep_ids=[1, 3])
        assert idx.list_ids[0].tolist() == [1, 0, 2]
        assert idx.list_ids[1].tolist() == [3, 2, 4]

    def test_s_equals_n_covers_everything(self, line_points, spec1):
        idx = build_one_shot(line_points, 2, line_points.n, spec1, seed=0, rep_ids=[0, 4])
        for row in idx.list_ids:
            assert sorted(row.tolist()) == list(range(line_points.n))

    def test_s_one_is_the_rep_itself(self, uniform8, spec8):
        idx = build_one_shot(uniform8, 20, 1, spec8, seed=6)
        assert np.array_equal(idx.list_ids[:, 0], idx.reps.rep_ids)
        assert np.all(idx.radii == 0.0)

    def test_s_out_of_range(self, uniform8, spec8):
        with pytest.raises(ValueError):
            build_one_shot(uniform8, 20, uniform8.n + 1, spec8, seed=0)

    def test_list_optimality(self, uniform8, spec8):
        # no point outside a list is closer to the rep than the list radius
        idx = build_one_shot(uniform8, 10, 25, spec8, seed=7)
        rng = np.random.default_rng(1)
        for pos in range(idx.reps.size):
            members = set(idx.list_ids[pos].tolist())
            outside = [i for i in rng.integers(uniform8.n, size=50).tolist() if i not in members]
            rep_point = uniform8.values[idx.reps.rep_ids[pos]][None, :]
            dists = distance_rows(uniform8.values[outside], rep_point, spec8)[:, 0]
            assert np.all(dists >= idx.radii[pos])

    def test_build_deterministic(self, uniform8, spec8):
        a = build_one_shot(uniform8, 30, 40, spec8, seed=8)
        b = build_one_shot(uniform8, 30, 40, spec8, seed=8)
        assert np.array_equal(a.list_ids, b.list_ids) and np.array_equal(a.radii, b.radii)


class TestParameterFormulas:
    def test_standard_setting_examples(self):
        assert standard_params_exact(10**4, 4) == 800
        assert standard_params_exact(10**4, 1) == 100
        assert standard_params_exact(100, 100) == 100  # clamped to n

    def test_standard_setting_errors(self):
        with pytest.raises(ValueError):
            standard_params_exact(100, 0.5)
        with pytest.raises(ValueError):
            standard_params_exact(0, 2)

    def test_one_shot_examples(self):
        assert one_shot_params(10**4, 2, math.exp(-1)) == (200, 200)
        assert one_shot_params(10**4, 1, math.exp(-4)) == (200, 200)

    def test_one_shot_clamps_near_delta_one(self):
        n_r, s = one_shot_params(10**4, 1, 1 - 1e-12)
        assert n_r == 1 and s == 1

    def test_one_shot_clamps_to_n(self):
        n_r, s = one_shot_params(100, 50, 0.01)
        assert n_r == 100 and s == 100

    def test_one_shot_delta_validation(self):
        for delta in (0.0, 1.0, -0.1, 2.0):
            with pytest.raises(ValueError):
                one_shot_params(100, 2, delta)


class TestSerialization:
    @pytest.fixture
    def exact_index(self, uniform8, spec8):
        return build_exact(uniform8, 35, spec8, seed=11)

    @pytest.fixture
    def one_shot_index(self, uniform8, spec8):
        return build_one_shot(uniform8, 35, 20, spec8, seed=11, mode=FIXED_COUNT)

    def test_exact_roundtrip(self, tmp_path, exact_index):
        path = tmp_path / "e.rbci"
        save_index(exact_index, path)
        back = load_index(path)
        assert np.array_equal(back.reps.rep_ids, exact_index.reps.rep_ids)
        assert back.reps.sampling_mode == exact_index.reps.sampling_mode
        assert back.reps.seed == exact_index.reps.seed
        assert back.metric == exact_index.metric
        assert all(np.array_equal(a, b) for a, b in zip(back.list_ids, exact_index.list_ids))
        assert all(np.array_equal(a, b) for a, b in zip(back.list_dists, exact_index.list_dists))
        assert np.array_equal(back.radii, exact_index.radii)
        assert np.array_equal(back.data.values, exact_index.data.values)

    def test_one_shot_roundtrip(self, tmp_path, one_shot_index):
        path = tmp_path / "o.rbci"
        save_index(one_shot_index, path)
        back = load_index(path)
        assert back.s == one_shot_index.s
        assert back.reps.sampling_mode == FIXED_COUNT
        assert np.array_equal(back.list_ids, one_shot_index.list_ids)
        assert np.array_equal(back.radii, one_shot_index.radii)
        assert np.array_equal(back.data.values, one_shot_index.data.values)

    def test_large_seed_survives(self, uniform8, spec8, tmp_path):
        idx = build_exact(uniform8, 20, spec8, seed=(37 << 40) + 123)
        path = tmp_path / "seed.rbci"
        save_index(idx, path)
        assert load_index(path).reps.seed == (37 << 40) + 123

    def test_truncated_index(self, tmp_path, exact_index):
        path = tmp_path / "t.rbci"
        save_index(exact_index, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 100])
        with pytest.raises(OSError):
            load_index(path)

    def test_bad_magic(self, tmp_path, exact_index):
        path = tmp_path / "bad.rbci"
        save_index(exact_index, path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"WHAT"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError):
            load_index(path)
