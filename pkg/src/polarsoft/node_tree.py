"""Decomposition of a frozen pattern into a pruned tree of special nodes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .code_construction import (BRANCH, RATE0, RATE1, REP, SPC, CodeSpec,
                                classify_mask, polar_transform)

NODE_KINDS = (BRANCH, RATE0, REP, RATE1, SPC)


def classify_node(frozen_mask) -> str:
    """Node kind of a frozen mask: all-frozen, repetition (one trailing info
    bit), all-information, single parity check, or branch."""
    return classify_mask(frozen_mask)


@dataclass(eq=False)
class TreeNode:
    """One node of the decoding tree; spans are half-open 0-based [start, end)."""

    start: int
    end: int
    level: int
    kind: str
    children: tuple = ()
    dynamic_positions: tuple = ()
    sf_table: np.ndarray | None = None
    info_dim: int = 0

    @property
    def size(self) -> int:
        return self.end - self.start

    @property
    def is_leaf(self) -> bool:
        return self.kind != BRANCH


@dataclass(eq=False)
class DecodingTree:
    """Pruned decode tree whose leaves are the four special node kinds."""

    root: TreeNode
    n_bits: int
    max_node_size: int
    leaves: tuple = ()
    internal_count: int = 0

    def dump(self) -> str:
        """Indented text rendering for debugging and latency audits."""
        lines = []

        def walk(node, depth):
            span = f"[{node.start + 1}..{node.end}]"
            extra = ""
            if node.dynamic_positions:
                extra = " dyn=" + ",".join(
                    str(t + 1) for t in node.dynamic_positions)
            lines.append(f"{'  ' * depth}{node.kind} {span} "
                         f"size={node.size}{extra}")
            for child in node.children:
                walk(child, depth + 1)

        walk(self.root, 0)
        return "\n".join(lines)


def _build_sf_table(size: int, local_dynamic: tuple) -> np.ndarray:
    """Codeword contribution of each dynamic frozen-value combination.

    Row k encodes the transform of the node input that sets the dynamic
    positions to the bits of k (first listed position is the low bit); row 0
    is the all-zeros codeword.
    """
    n_dyn = len(local_dynamic)
    inputs = np.zeros((1 << n_dyn, size), dtype=np.int8)
    for key in range(1 << n_dyn):
        for r, pos in enumerate(local_dynamic):
            inputs[key, pos] = (key >> r) & 1
    return polar_transform(inputs)


def decompose(spec: CodeSpec, max_node_size: int | None = None) -> DecodingTree:
    """Greedy top-down decomposition of the code into special nodes.

    A span becomes a leaf at the largest size (up to max_node_size) whose
    frozen mask is special; otherwise it splits into two half spans.  Length-1
    spans are always special, so the recursion terminates.  Leaves record the
    spec's dynamic frozen positions falling inside their span; caps below the
    spec's own max_node_size only ever refine the canonical leaves, so each
    leaf sees at most f_d dynamic positions.
    """
    mask = spec.frozen_mask()
    cap = spec.max_node_size if max_node_size is None else max_node_size
    leaves = []
    internal = 0

    def build(lo: int, hi: int, level: int) -> TreeNode:
        nonlocal internal
        kind = classify_mask(mask[lo:hi])
        if kind != BRANCH and (hi - lo) <= cap:
            dyn = tuple(t for t in sorted(spec.dynamic_positions)
                        if lo <= t < hi)
            node = TreeNode(lo, hi, level, kind, dynamic_positions=dyn,
                            info_dim=int((1 - mask[lo:hi]).sum()))
            if dyn:
                node.sf_table = _build_sf_table(hi - lo,
                                                tuple(t - lo for t in dyn))
            leaves.append(node)
            return node
        internal += 1
        mid = (lo + hi) // 2
        left = build(lo, mid, level + 1)
        right = build(mid, hi, level + 1)
        return TreeNode(lo, hi, level, BRANCH, children=(left, right))

    root = build(0, spec.n_bits, 0)
    return DecodingTree(root=root, n_bits=spec.n_bits, max_node_size=cap,
                        leaves=tuple(leaves), internal_count=internal)
