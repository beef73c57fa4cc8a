import itertools
import math

import numpy as np
import pytest

from polarsoft.code_construction import build_code_spec, encode
from polarsoft.fscl_core import (decode_rate0, decode_rate1, decode_rep,
                                 decode_spc, frozen_bit_llr, fscl_decode,
                                 modify_llrs_dynamic)
from polarsoft.node_tree import decompose
from polarsoft.scl_core import (HW_APPROX, MINSUM, f_op,
                                forced_path_metric, scl_decode)

def SOFTPLUS(x):
    return math.log1p(math.exp(-abs(x))) + max(-x, 0.0)


class TestModifyLlrs:
    def test_zero_pattern_is_identity(self):
        alpha = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(modify_llrs_dynamic(alpha, np.zeros(3)), alpha)

    def test_all_ones_flips_sign(self):
        alpha = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(modify_llrs_dynamic(alpha, np.ones(3)), -alpha)

    def test_elementwise(self):
        alpha = np.array([1.0, 2.0, 3.0, 4.0])
        s_f = np.array([1, 0, 1, 0])
        assert np.array_equal(modify_llrs_dynamic(alpha, s_f),
                              [-1.0, 2.0, -3.0, 4.0])


class TestRate0:
    def test_two_positive_llrs(self):
        res = decode_rate0(np.array([[4.0, 4.0]]), np.array([0.0]))
        assert res.path_metrics[0] == pytest.approx(
            2 * math.log1p(math.exp(-4)), abs=1e-9)
        assert res.path_metrics[0] == pytest.approx(0.036300, abs=1e-6)
        assert not res.s_hat.any()

    def test_saturated_llrs_cost_nothing(self):
        res = decode_rate0(np.full((1, 8), 500.0), np.array([0.0]))
        assert res.path_metrics[0] == pytest.approx(0.0, abs=1e-12)

    def test_erasures_cost_log_two_each(self):
        res = decode_rate0(np.zeros((1, 8)), np.array([0.0]))
        assert res.path_metrics[0] == pytest.approx(8 * math.log(2))

    def test_no_path_split(self):
        res = decode_rate0(np.ones((3, 4)), np.zeros(3))
        assert np.array_equal(res.parent_index, [0, 1, 2])
        assert not res.pruned


class TestRep:
    def test_both_branches_kept(self):
        res = decode_rep(np.array([[3.0, 3.0]]), np.array([0.0]), 2)
        assert len(res.path_metrics) == 2
        assert res.path_metrics[0] == pytest.approx(
            2 * math.log1p(math.exp(-3)))
        assert res.path_metrics[1] == pytest.approx(
            2 * math.log1p(math.exp(3)))
        assert not res.s_hat[0].any() and res.s_hat[1].all()

    def test_negative_llrs_prefer_all_ones(self):
        res = decode_rep(np.full((1, 4), -2.5), np.array([0.0]), 1)
        assert res.s_hat[0].all()

    def test_list_one_discards_one_root(self):
        res = decode_rep(np.array([[1.0, 2.0]]), np.array([0.0]), 1)
        assert len(res.path_metrics) == 1
        assert len(res.discarded_metrics) == 1
        assert res.pruned


class TestRate1:
    def test_list_one_is_hard_decision(self):
        alpha = np.array([[2.0, -1.0, 0.5, -3.0]])
        res = decode_rate1(alpha, np.array([0.0]), 1)
        assert np.array_equal(res.s_hat[0], [0, 1, 0, 1])
        assert res.flip_count == 0
        want = sum(SOFTPLUS(abs(v)) for v in alpha[0])
        assert res.path_metrics[0] == pytest.approx(want)

    def test_list_one_hw_metric_is_zero(self):
        alpha = np.array([[2.0, -1.0, 0.5, -3.0]])
        res = decode_rate1(alpha, np.array([0.0]), 1, pm_mode=HW_APPROX)
        assert res.path_metrics[0] == 0.0

    def test_flip_round_count(self):
        res = decode_rate1(np.ones((1, 8)), np.array([0.0]), 4)
        assert res.flip_count == 3

    def test_full_list_enumerates_all_leaves(self):
        rng = np.random.default_rng(0)
        alpha = rng.uniform(-2, 2, (1, 2))
        res = decode_rate1(alpha, np.array([0.0]), 4)
        assert len(res.path_metrics) == 4
        assert not res.pruned
        leaves = {tuple(s) for s in res.s_hat}
        assert leaves == set(itertools.product((0, 1), repeat=2))

    def test_survivors_are_best_candidates(self):
        rng = np.random.default_rng(1)
        alpha = rng.uniform(-3, 3, (1, 4))
        res = decode_rate1(alpha, np.array([0.0]), 16)
        masses = sorted(res.path_metrics)
        # with L = 2^size everything is enumerated: masses must sum to 1
        assert sum(math.exp(-m) for m in masses) == pytest.approx(1.0)


class TestSpc:
    def test_wagner_parity_repair(self):
        alpha = np.array([[5.0, 4.0, 3.0, -2.0]])
        res = decode_spc(alpha, np.array([0.0]), 1)
        # hard decision 0001 has odd parity; the least reliable position
        # (the -2) is flipped back to zero
        assert np.array_equal(res.s_hat[0], [0, 0, 0, 0])

    def test_flip_count(self):
        res = decode_spc(np.ones((1, 8)), np.array([0.0]), 4)
        assert res.flip_count == 4

    def test_all_candidates_have_even_parity(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            size = rng.choice([2, 4, 8, 16])
            alpha = rng.uniform(-3, 3, (2, size))
            res = decode_spc(alpha, np.zeros(2), 8)
            assert not (res.s_hat.sum(axis=1) & 1).any()

    def test_full_list_enumerates_even_parity_leaves(self):
        rng = np.random.default_rng(3)
        alpha = rng.uniform(-2, 2, (1, 4))
        res = decode_spc(alpha, np.array([0.0]), 8)
        assert len(res.path_metrics) == 8
        leaves = {tuple(s) for s in res.s_hat}
        want = {c for c in itertools.product((0, 1), repeat=4)
                if sum(c) % 2 == 0}
        assert leaves == want

    def test_frozen_bit_llr_is_full_check_reduction(self):
        rng = np.random.default_rng(4)
        alpha = rng.uniform(-3, 3, (3, 8))
        lam = frozen_bit_llr(alpha)
        for row in range(3):
            acc = alpha[row]
            while len(acc) > 1:
                acc = np.array([f_op(acc[i], acc[i + len(acc) // 2])
                                for i in range(len(acc) // 2)])
            assert lam[row] == pytest.approx(acc[0], abs=1e-12)


class TestFsclDecode:
    def test_all_frozen_code(self):
        spec = build_code_spec(8, 0)
        lam = np.array([1.0, -2.0, 0.5, 3.0, -1.0, 2.0, 0.1, -0.4])
        paths = fscl_decode(spec, lam, 4)
        assert len(paths) == 1
        assert not paths.best().codeword.any()

    def test_codeword_side_metric_equals_bit_side(self):
        # every survivor's metric equals the sequential per-bit total
        rng = np.random.default_rng(5)
        for n_bits, k_info in ((4, 3), (8, 4), (16, 8), (16, 11), (16, 5)):
            spec = build_code_spec(n_bits, k_info)
            lam = rng.uniform(-4, 4, n_bits)
            for path in fscl_decode(spec, lam, 4):
                bit_side = forced_path_metric(spec, lam, path.u_est)
                assert path.path_metric == pytest.approx(bit_side, abs=1e-9)

    def test_matches_sequential_decoder_at_full_list(self):
        rng = np.random.default_rng(6)
        for dyn in ("static", "xor"):
            spec = build_code_spec(16, 8, dynamic_rule=dyn, f_d=3)
            lam = rng.uniform(-3, 3, 16)
            a = scl_decode(spec, lam, 256)
            b = fscl_decode(spec, lam, 256)
            pa = sorted(p.path_metric for p in a)
            pb = sorted(p.path_metric for p in b)
            assert np.allclose(pa, pb, atol=1e-9)
            assert {p.codeword.tobytes() for p in a} == \
                {p.codeword.tobytes() for p in b}

    def test_multiset_identity_in_hardware_arithmetic(self):
        # greedy pruning keeps the same metric multisets as the sequential
        # decoder when metrics are the sign-mismatch penalties
        rng = np.random.default_rng(7)
        checked = 0
        while checked < 60:
            n_bits = int(rng.choice([8, 16, 32]))
            k_info = int(rng.integers(1, n_bits))
            spec = build_code_spec(n_bits, k_info)
            tree = decompose(spec)
            mask = spec.frozen_mask()
            l_min = max(1 << (leaf.size - int(mask[leaf.start:leaf.end].sum()))
                        for leaf in tree.leaves)
            if l_min > 64:
                continue
            lam = rng.uniform(-4, 4, n_bits)
            list_size = max(l_min, 4)
            a = scl_decode(spec, lam, list_size, fg_mode=MINSUM,
                           pm_mode=HW_APPROX)
            b = fscl_decode(spec, lam, list_size, tree, fg_mode=MINSUM,
                            pm_mode=HW_APPROX)
            pa = sorted(p.path_metric for p in a)
            pb = sorted(p.path_metric for p in b)
            assert np.allclose(pa, pb, atol=1e-9)
            checked += 1

    def test_hard_output_matches_sequential_decoder(self):
        spec = build_code_spec(64, 32)
        tree = decompose(spec)
        rng = np.random.default_rng(8)
        agree = 0
        for _ in range(100):
            payload = rng.integers(0, 2, 32, dtype=np.int8)
            _, codeword = encode(spec, payload)
            lam = 2.0 * (1.0 - 2.0 * codeword) + rng.normal(0, 1.2, 64)
            a = scl_decode(spec, lam, 4).best()
            b = fscl_decode(spec, lam, 4, tree).best()
            agree += np.array_equal(a.codeword, b.codeword)
        assert agree >= 99

    def test_dynamic_frozen_outputs_respect_constraints(self):
        from polarsoft.code_construction import check_dynamic_constraints
        spec = build_code_spec(64, 24, dynamic_rule="xor", f_d=3)
        rng = np.random.default_rng(9)
        lam = rng.uniform(-2, 2, 64)
        for path in fscl_decode(spec, lam, 8):
            assert check_dynamic_constraints(spec, path.u_est)

    def test_single_frozen_bit_code_matches_sequential_survivors(self):
        # one frozen position: the tree is an all-information node next to
        # a repetition node, and both decoders keep the same two paths
        spec = build_code_spec(4, 3, info_set=[0, 1, 3])
        tree = decompose(spec)
        assert [leaf.kind for leaf in tree.leaves] == ["rate1", "rep"]
        lam = np.array([2.9, 0.3, -1.6, -0.6])
        a = scl_decode(spec, lam, 2)
        b = fscl_decode(spec, lam, 2, tree)
        assert np.allclose([p.path_metric for p in a],
                           [p.path_metric for p in b], atol=1e-12)
        assert [tuple(p.u_est) for p in a] == [tuple(p.u_est) for p in b]

    def test_single_parity_code_outputs_even_parity(self):
        spec = build_code_spec(16, 15)  # one frozen bit at position 0
        assert spec.frozen_set == (0,)
        rng = np.random.default_rng(10)
        lam = rng.uniform(-2, 2, 16)
        for path in fscl_decode(spec, lam, 8):
            assert path.codeword.sum() % 2 == 0

    def test_coarse_and_fine_trees_recover_clean_frames(self):
        # different node caps change the pruning schedule, but both must
        # recover a noiseless transmission
        spec = build_code_spec(64, 32, dynamic_rule="xor", f_d=3)
        rng = np.random.default_rng(11)
        payload = rng.integers(0, 2, 32, dtype=np.int8)
        _, codeword = encode(spec, payload)
        lam = 15.0 * (1.0 - 2.0 * codeword)
        for cap in (64, 8, 4, 2):
            best = fscl_decode(spec, lam, 4,
                               decompose(spec, max_node_size=cap)).best()
            assert np.array_equal(best.codeword, codeword)
