import itertools
import math

import numpy as np
import pytest

from polarsoft.code_construction import build_code_spec, encode
from polarsoft.scl_core import (HW_APPROX, MINSUM, crc_select, f_op,
                                forced_path_metric, g_op, pm_increment,
                                scl_decode)
from polarsoft.soft_output import CodebookProbTracker


def exact_boxplus_reference(a, b):
    return 2.0 * np.arctanh(np.tanh(a / 2.0) * np.tanh(b / 2.0))


class TestFOp:
    def test_erasure_absorbs(self):
        for x in (-7.0, 0.0, 0.4, 25.0):
            assert f_op(0.0, x) == 0.0
            assert f_op(x, 0.0) == 0.0

    def test_saturation_limit(self):
        assert f_op(100.0, 3.0) == pytest.approx(3.0, abs=1e-6)

    def test_matches_atanh_form(self):
        rng = np.random.default_rng(0)
        a = rng.uniform(-10, 10, 200)
        b = rng.uniform(-10, 10, 200)
        assert np.allclose(f_op(a, b), exact_boxplus_reference(a, b),
                           atol=1e-12)

    def test_minsum(self):
        assert f_op(2.0, -3.0, MINSUM) == -2.0
        assert f_op(-2.0, -3.0, MINSUM) == 2.0

    def test_overflow_safe(self):
        out = f_op(1e6, -1e6)
        assert np.isfinite(out)


class TestGOp:
    def test_examples(self):
        assert g_op(1.5, 2.0, 0) == pytest.approx(3.5)
        assert g_op(1.5, 2.0, 1) == pytest.approx(0.5)
        assert g_op(0.0, -2.0, 1) == pytest.approx(-2.0)


class TestPmIncrement:
    def test_uninformative_channel(self):
        assert pm_increment(0.0, 0) == pytest.approx(math.log(2))

    def test_agreeing_and_contradicting(self):
        assert pm_increment(4.0, 0) == pytest.approx(math.log1p(math.exp(-4)))
        assert pm_increment(4.0, 0) == pytest.approx(0.018150, abs=1e-6)
        assert pm_increment(4.0, 1) == pytest.approx(math.log1p(math.exp(4)))
        assert pm_increment(4.0, 1) == pytest.approx(4.018150, abs=1e-6)

    def test_hardware_approximation(self):
        assert pm_increment(4.0, 0, HW_APPROX) == 0.0
        assert pm_increment(4.0, 1, HW_APPROX) == 4.0
        assert pm_increment(-2.5, 0, HW_APPROX) == 2.5

    def test_never_negative(self):
        rng = np.random.default_rng(1)
        lam = rng.uniform(-30, 30, 500)
        for u in (0, 1):
            assert np.all(pm_increment(lam, u) >= 0.0)
            assert np.all(pm_increment(lam, u, HW_APPROX) >= 0.0)

    def test_mass_conservation(self):
        # exp(-inc0) + exp(-inc1) = 1: each split conserves path mass
        rng = np.random.default_rng(2)
        lam = rng.uniform(-25, 25, 300)
        total = np.exp(-pm_increment(lam, 0)) + np.exp(-pm_increment(lam, 1))
        assert np.max(np.abs(total - 1.0)) < 1e-12


class TestForcedPaths:
    @pytest.mark.parametrize("n_bits", [2, 4, 8])
    def test_normalization_over_all_leaves(self, n_bits):
        # sum of exp(-PM) over every unconstrained path is exactly one
        spec = build_code_spec(n_bits, n_bits)
        rng = np.random.default_rng(3)
        lam = rng.uniform(-4, 4, n_bits)
        total = 0.0
        for bits in itertools.product((0, 1), repeat=n_bits):
            total += math.exp(-forced_path_metric(spec, lam, np.array(bits)))
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_forced_metric_matches_list_output(self):
        spec = build_code_spec(16, 7)
        rng = np.random.default_rng(4)
        lam = rng.uniform(-3, 3, 16)
        for path in scl_decode(spec, lam, 4):
            assert forced_path_metric(spec, lam, path.u_est) == pytest.approx(
                path.path_metric, abs=1e-10)


class TestSclDecode:
    def test_list_size_one_is_single_path(self):
        spec = build_code_spec(16, 8)
        rng = np.random.default_rng(5)
        lam = rng.uniform(-3, 3, 16)
        paths = scl_decode(spec, lam, 1)
        assert len(paths) == 1

    def test_noiseless_recovery(self):
        rng = np.random.default_rng(6)
        for n_bits, k_info in ((8, 5), (32, 20), (64, 30)):
            spec = build_code_spec(n_bits, k_info)
            payload = rng.integers(0, 2, k_info, dtype=np.int8)
            _, codeword = encode(spec, payload)
            lam = 20.0 * (1.0 - 2.0 * codeword)
            best = scl_decode(spec, lam, 4).best()
            assert np.array_equal(best.codeword, codeword)

    def test_two_path_survivor_set(self):
        # single frozen position (index 2); these LLRs leave prefixes 01 and
        # 10 as the two survivors and both finish with a one in the last bit
        spec = build_code_spec(4, 3, info_set=[0, 1, 3])
        paths = scl_decode(spec, np.array([2.9, 0.3, -1.6, -0.6]), 2)
        leaves = sorted(tuple(int(b) for b in p.u_est) for p in paths)
        assert leaves == [(0, 1, 0, 1), (1, 0, 0, 1)]

    def test_sorted_by_metric(self):
        spec = build_code_spec(32, 16)
        rng = np.random.default_rng(7)
        lam = rng.uniform(-3, 3, 32)
        pms = [p.path_metric for p in scl_decode(spec, lam, 8)]
        assert pms == sorted(pms)

    def test_deterministic(self):
        spec = build_code_spec(32, 16)
        rng = np.random.default_rng(8)
        lam = rng.uniform(-3, 3, 32)
        a = scl_decode(spec, lam, 4)
        b = scl_decode(spec, lam, 4)
        for pa, pb in zip(a, b):
            assert pa.path_metric == pb.path_metric
            assert np.array_equal(pa.u_est, pb.u_est)

    def test_full_list_visits_whole_codebook(self):
        spec = build_code_spec(8, 4)
        rng = np.random.default_rng(9)
        lam = rng.uniform(-3, 3, 8)
        tracker = CodebookProbTracker()
        paths = scl_decode(spec, lam, 16, tracker)
        assert len(paths) == 16
        assert tracker.unvisited_mass_log == -np.inf
        codewords = {p.codeword.tobytes() for p in paths}
        assert len(codewords) == 16

    def test_tracker_collects_discards_at_small_list(self):
        spec = build_code_spec(8, 4)
        rng = np.random.default_rng(10)
        lam = rng.uniform(-3, 3, 8)
        tracker = CodebookProbTracker()
        scl_decode(spec, lam, 2, tracker)
        assert tracker.unvisited_mass_log > -np.inf


class TestCrcSelect:
    def _spec_paths(self, seed, noise):
        spec = build_code_spec(32, 10, crc_len=6)
        rng = np.random.default_rng(seed)
        payload = rng.integers(0, 2, 10, dtype=np.int8)
        _, codeword = encode(spec, payload)
        lam = 6.0 * (1.0 - 2.0 * codeword) + rng.normal(0, noise, 32)
        return spec, payload, scl_decode(spec, lam, 8)

    def test_passing_path_selected(self):
        spec, payload, paths = self._spec_paths(0, 1.0)
        best, ok = crc_select(paths, spec)
        assert ok
        assert np.array_equal(best.nonfrozen_bits(spec)[:10], payload)

    def test_no_passing_path_falls_back_to_best_metric(self):
        spec = build_code_spec(32, 10, crc_len=6)
        rng = np.random.default_rng(1)
        lam = rng.uniform(-0.5, 0.5, 32)
        paths = scl_decode(spec, lam, 2)
        selected, ok = crc_select(paths, spec)
        if not ok:
            assert selected is paths.best()

    def test_lowest_metric_among_passing_wins(self):
        spec, _, paths = self._spec_paths(2, 0.5)
        from polarsoft.code_construction import crc_check
        passing = [p for p in paths
                   if crc_check(p.nonfrozen_bits(spec), spec.crc_len)]
        if len(passing) >= 2:
            best, ok = crc_select(paths, spec)
            assert ok
            assert best.path_metric == min(p.path_metric for p in passing)

    def test_requires_crc(self):
        spec = build_code_spec(8, 4)
        rng = np.random.default_rng(3)
        paths = scl_decode(spec, rng.uniform(-1, 1, 8), 2)
        with pytest.raises(ValueError):
            crc_select(paths, spec)
