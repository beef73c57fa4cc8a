"""Deterministic time-step accounting for the list decoders.

One time step covers one parallel stage of real-valued or check-node
operations, or one sort-and-select; hard decisions and bit operations are
free.  Every internal tree node costs two steps (one LLR combine stage per
child); leaves cost a per-kind amount depending on the decoder.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .code_construction import RATE0, RATE1, REP, SPC, CodeSpec
from .node_tree import DecodingTree, decompose

SCL = "scl"
FSCL = "fscl"
SO_SCL = "so-scl"
SO_FSCL = "so-fscl"

DECODER_KINDS = (SCL, FSCL, SO_SCL, SO_FSCL)


def node_cost(kind: str, node_size: int, list_size: int,
              decoder: str) -> int:
    """Time steps to decode one special node of the given size.

    The sequential decoders pay the full bit-by-bit traversal of the node;
    the fast decoders pay per-kind costs (all-frozen and repetition nodes of
    the soft fast decoder spend one extra step on the dynamic frozen
    sequence plus LLR sign adjustment, and its parity-check nodes also build
    the frozen-bit path probability in log2(size) steps alongside the
    flips).
    """
    log2n = int(math.log2(node_size)) if node_size > 1 else 0
    if decoder in (SCL, SO_SCL):
        info = {RATE0: 0, REP: 1, RATE1: node_size, SPC: node_size - 1}[kind]
        return 2 * (node_size - 1) + info
    if decoder == FSCL:
        return {RATE0: 1, REP: 2,
                RATE1: min(list_size, node_size + 1),
                SPC: min(list_size, node_size)}[kind]
    if decoder == SO_FSCL:
        return {RATE0: 2, REP: 3,
                RATE1: min(list_size, node_size + 1),
                SPC: max(log2n, min(list_size, node_size))}[kind]
    raise ValueError(f"unknown decoder {decoder!r}")


@dataclass
class LatencyReport:
    """Total time steps plus the per-leaf breakdown of one decoder."""

    decoder: str
    list_size: int
    total_steps: int
    traversal_steps: int
    per_node: list  # (start, end, kind, size, steps)
    includes_final_soft_step: bool

    def to_json_lines(self) -> str:
        rows = [{"record": "total", "decoder": self.decoder,
                 "list_size": self.list_size, "steps": self.total_steps,
                 "traversal_steps": self.traversal_steps,
                 "final_soft_step": self.includes_final_soft_step}]
        rows += [{"record": "node", "decoder": self.decoder, "start": lo + 1,
                  "end": hi, "kind": kind, "size": size, "steps": steps}
                 for lo, hi, kind, size, steps in self.per_node]
        return "\n".join(json.dumps(r) for r in rows)

    def to_text(self) -> str:
        head = (f"{self.decoder}  L={self.list_size}  "
                f"total={self.total_steps} steps "
                f"(traversal {self.traversal_steps}"
                f"{', +1 final soft step' if self.includes_final_soft_step else ''})")
        lines = [head, f"  {'span':>12} {'kind':>6} {'size':>5} {'steps':>5}"]
        for lo, hi, kind, size, steps in self.per_node:
            lines.append(f"  [{lo + 1:4d}..{hi:4d}] {kind:>6} {size:5d} "
                         f"{steps:5d}")
        return "\n".join(lines)


def total_latency(tree: DecodingTree, list_size: int, decoder: str,
                  include_final_soft_step: bool = False) -> LatencyReport:
    """Time steps for one decode over a decomposed tree.

    For the sequential decoders this reproduces the closed form
    2N + K - 2 of plain list decoding regardless of the tree shape.  The
    soft decoders' final per-bit LLR combination adds one extra step only
    when requested; the published totals omit it.
    """
    if decoder not in DECODER_KINDS:
        raise ValueError(f"unknown decoder {decoder!r}")
    traversal = 2 * tree.internal_count
    per_node = []
    total = traversal
    for leaf in tree.leaves:
        steps = node_cost(leaf.kind, leaf.size, list_size, decoder)
        per_node.append((leaf.start, leaf.end, leaf.kind, leaf.size, steps))
        total += steps
    final = include_final_soft_step and decoder in (SO_SCL, SO_FSCL)
    if final:
        total += 1
    return LatencyReport(decoder=decoder, list_size=list_size,
                         total_steps=total, traversal_steps=traversal,
                         per_node=per_node,
                         includes_final_soft_step=final)


def scl_closed_form(spec: CodeSpec) -> int:
    """2N + K - 2 time steps for plain list decoding of an (N, K) code."""
    return 2 * spec.n_bits + spec.n_nonfrozen - 2


def latency_summary(spec: CodeSpec, list_size: int,
                    max_node_size: int | None = None,
                    include_final_soft_step: bool = False) -> dict:
    """Reports for all decoder kinds over the spec's decomposition."""
    tree = decompose(spec, max_node_size)
    return {dec: total_latency(tree, list_size, dec, include_final_soft_step)
            for dec in DECODER_KINDS}
