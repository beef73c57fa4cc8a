import json

import numpy as np
import pytest

from polarsoft.code_construction import (FIVE_G, POLAR_WEIGHT, RATE0, RATE1,
                                         REP, SPC, build_code_spec)
from polarsoft.latency_model import (latency_summary, node_cost,
                                     scl_closed_form, total_latency)
from polarsoft.node_tree import decompose


class TestNodeCost:
    def test_fast_decoder_costs(self):
        assert node_cost(RATE0, 16, 4, "fscl") == 1
        assert node_cost(REP, 16, 4, "fscl") == 2
        assert node_cost(RATE1, 8, 4, "fscl") == 4
        assert node_cost(RATE1, 2, 4, "fscl") == 3
        assert node_cost(SPC, 8, 4, "fscl") == 4
        assert node_cost(SPC, 2, 4, "fscl") == 2

    def test_soft_fast_decoder_costs(self):
        assert node_cost(RATE0, 64, 4, "so-fscl") == 2
        assert node_cost(REP, 64, 4, "so-fscl") == 3
        assert node_cost(SPC, 32, 4, "so-fscl") == 5
        assert node_cost(SPC, 8, 4, "so-fscl") == 4
        assert node_cost(RATE1, 4, 4, "so-fscl") == 4

    def test_sequential_decoder_costs(self):
        assert node_cost(RATE0, 4, 4, "so-scl") == 6
        assert node_cost(REP, 4, 4, "so-scl") == 7
        assert node_cost(RATE1, 4, 4, "so-scl") == 10
        assert node_cost(SPC, 4, 4, "so-scl") == 9

    def test_per_node_dominance(self):
        for size in (2, 4, 8, 16, 32, 64):
            for kind in (RATE0, REP, RATE1, SPC):
                if kind in (REP, SPC) and size < 2:
                    continue
                for list_size in (1, 2, 4, 8, 32):
                    fast = node_cost(kind, size, list_size, "fscl")
                    soft_fast = node_cost(kind, size, list_size, "so-fscl")
                    seq = node_cost(kind, size, list_size, "so-scl")
                    assert fast <= seq
                    assert soft_fast >= fast

    def test_unknown_decoder(self):
        with pytest.raises(ValueError):
            node_cost(RATE0, 4, 4, "bogus")


class TestTotalLatency:
    def test_sequential_closed_form_any_tree(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n_bits = int(rng.choice([16, 64, 256]))
            k_info = int(rng.integers(0, n_bits + 1))
            spec = build_code_spec(n_bits, k_info)
            tree = decompose(spec)
            rep = total_latency(tree, 4, "scl")
            assert rep.total_steps == scl_closed_form(spec)
            assert rep.total_steps == 2 * n_bits + k_info - 2

    def test_all_frozen_code_is_one_step(self):
        spec = build_code_spec(4, 0)
        rep = total_latency(decompose(spec), 4, "fscl")
        assert rep.total_steps == 1
        assert rep.traversal_steps == 0

    def test_fast_never_slower_than_sequential(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n_bits = int(rng.choice([32, 128, 512]))
            k_info = int(rng.integers(0, n_bits + 1))
            for list_size in (2, 8):
                spec = build_code_spec(n_bits, k_info)
                tree = decompose(spec)
                fast = total_latency(tree, list_size, "fscl").total_steps
                soft_fast = total_latency(tree, list_size,
                                          "so-fscl").total_steps
                seq = total_latency(tree, list_size, "so-scl").total_steps
                assert fast <= seq
                assert soft_fast >= fast

    def test_final_soft_step_flag(self):
        spec = build_code_spec(64, 32)
        tree = decompose(spec)
        base = total_latency(tree, 4, "so-fscl").total_steps
        plus = total_latency(tree, 4, "so-fscl",
                             include_final_soft_step=True)
        assert plus.total_steps == base + 1
        assert plus.includes_final_soft_step
        hard = total_latency(tree, 4, "fscl", include_final_soft_step=True)
        assert hard.total_steps == total_latency(tree, 4,
                                                 "fscl").total_steps

    def test_breakdown_sums_to_total(self):
        spec = build_code_spec(256, 85)
        tree = decompose(spec)
        rep = total_latency(tree, 4, "so-fscl")
        assert rep.total_steps == rep.traversal_steps + sum(
            steps for *_, steps in rep.per_node)


class TestPublishedTargets:
    def test_sequential_totals(self):
        for n_bits, k_info, want in ((512, 256, 1278), (1024, 512, 2558),
                                     (256, 85, 595)):
            spec = build_code_spec(n_bits, k_info)
            rep = total_latency(decompose(spec), 4, "so-scl")
            assert rep.total_steps == want

    def test_weight_ordered_construction_hits_reference_totals(self):
        targets = {(256, 85): (121, 137), (512, 256): (232, 259),
                   (1024, 512): (402, 450)}
        for (n_bits, k_info), (fast, soft_fast) in targets.items():
            spec = build_code_spec(n_bits, k_info,
                                   construction=POLAR_WEIGHT)
            tree = decompose(spec)
            assert total_latency(tree, 4, "fscl").total_steps == fast
            assert total_latency(tree, 4, "so-fscl").total_steps == soft_fast

    def test_sequence_construction_stays_within_five_percent(self):
        targets = {(256, 85): (121, 137), (512, 256): (232, 259),
                   (1024, 512): (402, 450)}
        for (n_bits, k_info), (fast, soft_fast) in targets.items():
            spec = build_code_spec(n_bits, k_info, construction=FIVE_G)
            tree = decompose(spec)
            got_fast = total_latency(tree, 4, "fscl").total_steps
            assert abs(got_fast - fast) / fast <= 0.05


class TestReports:
    def test_json_lines_round_trip(self):
        spec = build_code_spec(64, 32)
        rep = total_latency(decompose(spec), 4, "so-fscl")
        lines = rep.to_json_lines().splitlines()
        rows = [json.loads(line) for line in lines]
        assert rows[0]["record"] == "total"
        assert rows[0]["steps"] == rep.total_steps
        assert len(rows) - 1 == len(rep.per_node)

    def test_text_table_mentions_every_leaf(self):
        spec = build_code_spec(64, 32)
        rep = total_latency(decompose(spec), 4, "fscl")
        text = rep.to_text()
        assert f"total={rep.total_steps}" in text
        assert text.count("\n") == len(rep.per_node) + 1

    def test_summary_covers_all_decoders(self):
        spec = build_code_spec(64, 32)
        summary = latency_summary(spec, 4)
        assert set(summary) == {"scl", "fscl", "so-scl", "so-fscl"}
