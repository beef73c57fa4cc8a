"""Fast list decoding of all-frozen, repetition, all-information and
single-parity-check nodes, with codeword-side metric updates.

Node decoders operate on the sign-adjusted LLRs of the all-zero-frozen
domain; when a node carries dynamic frozen bits the caller flips the signs
via the frozen-pattern codeword first and xors the same pattern back into
the estimates afterwards.  Metrics are identical in both domains.

Like the bit-by-bit engine, everything carries a leading frame axis so the
harness can decode batches; the public helpers work on one frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .code_construction import (RATE0, RATE1, REP, SPC, CodeSpec,
                                polar_transform)
from .node_tree import DecodingTree, TreeNode, decompose
from .scl_core import (EXACT, HW_APPROX, BatchPathLists, PathList,
                       _PathMemory, f_op, g_op, pm_increment)


def modify_llrs_dynamic(alpha: np.ndarray, s_f: np.ndarray) -> np.ndarray:
    """Sign-flip LLRs where the frozen-pattern codeword s_f has a one."""
    return (1.0 - 2.0 * np.asarray(s_f, dtype=np.float64)) * alpha


def _codeword_pm_terms(alpha: np.ndarray, s_hat, pm_mode: str) -> np.ndarray:
    """Metric penalty of estimating sub-codeword s_hat on LLRs alpha,
    summed over the node span (last axis)."""
    signed = (1.0 - 2.0 * np.asarray(s_hat)) * alpha
    if pm_mode == HW_APPROX:
        return np.where(signed >= 0.0, 0.0, -signed).sum(axis=-1)
    return np.logaddexp(0.0, -signed).sum(axis=-1)


def frozen_bit_llr(alpha: np.ndarray, fg_mode: str = EXACT) -> np.ndarray:
    """LLR of a node's first input bit: the check-node reduction of all its
    LLRs (one stage per tree level)."""
    x = np.asarray(alpha, dtype=np.float64)
    while x.shape[-1] > 1:
        half = x.shape[-1] // 2
        x = f_op(x[..., :half], x[..., half:], fg_mode)
    return x[..., 0]


def _gather_rows(arr: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """arr[b, rows[b, c]] for (batch, path, ...) arrays."""
    if arr.ndim == 2:
        return np.take_along_axis(arr, rows, axis=1)
    idx = rows.reshape(rows.shape + (1,) * (arr.ndim - 2))
    return np.take_along_axis(arr, idx, axis=1)


def _flip_at(bits: np.ndarray, pos: np.ndarray) -> None:
    """In place, toggle bits[b, c, pos[b, c]]."""
    idx = pos[:, :, None]
    cur = np.take_along_axis(bits, idx, axis=2)
    np.put_along_axis(bits, idx, cur ^ 1, axis=2)


@dataclass
class _BatchNodeResult:
    """Candidates surviving one node decode over a whole batch.

    `parent` is 1-D when the selection is frame-independent (pure growth)
    and (batch, count) otherwise; `s_hat` is in the decode domain.
    """

    parent: np.ndarray
    s_hat: np.ndarray
    pms: np.ndarray
    discarded: np.ndarray | None
    flip_count: int
    pruned: bool


def _rate0_batch(alpha, pm, list_size, pm_mode) -> _BatchNodeResult:
    batch, count, size = alpha.shape
    pms = pm + _codeword_pm_terms(alpha, 0, pm_mode)
    return _BatchNodeResult(np.arange(count),
                            np.zeros((batch, count, size), dtype=np.int8),
                            pms, None, 0, False)


def _rep_batch(alpha, pm, list_size, pm_mode) -> _BatchNodeResult:
    # candidates interleaved parent-major: index c is parent c//2, value c&1
    batch, count, size = alpha.shape
    cand = np.empty((batch, 2 * count))
    cand[:, 0::2] = pm + _codeword_pm_terms(alpha, 0, pm_mode)
    cand[:, 1::2] = pm + _codeword_pm_terms(alpha, 1, pm_mode)
    if 2 * count <= list_size:
        values = np.tile(np.array([0, 1], dtype=np.int8), count)
        s_hat = np.broadcast_to(values[None, :, None],
                                (batch, 2 * count, size)).copy()
        return _BatchNodeResult(np.repeat(np.arange(count), 2), s_hat, cand,
                                None, 0, False)
    order = np.argsort(cand, axis=1, kind="stable")
    keep = order[:, :list_size]
    values = (keep & 1).astype(np.int8)
    s_hat = np.repeat(values[:, :, None], size, axis=2)
    return _BatchNodeResult(keep >> 1, s_hat,
                            np.take_along_axis(cand, keep, axis=1),
                            np.take_along_axis(cand, order[:, list_size:],
                                               axis=1),
                            0, True)


def _rate1_batch(alpha, pm, list_size, pm_mode) -> _BatchNodeResult:
    """Hard decision plus min(L-1, size) rounds flipping the next least
    reliable position of each candidate's parent; pool order is current
    candidates then their flips."""
    batch, count, size = alpha.shape
    mag = np.abs(alpha)
    order = np.argsort(mag, axis=2, kind="stable")
    s_cur = (alpha < 0).astype(np.int8)
    pm_cur = pm + _codeword_pm_terms(alpha, s_cur, pm_mode)
    ref = np.broadcast_to(np.arange(count), (batch, count)).copy()
    rounds = min(list_size - 1, size)
    pruned = False
    for r in range(rounds):
        pos = np.take_along_axis(order[:, :, r], ref, axis=1)
        mag_ref = _gather_rows(mag, ref)
        val = np.take_along_axis(mag_ref, pos[:, :, None], axis=2)[:, :, 0]
        s_flip = s_cur.copy()
        _flip_at(s_flip, pos)
        pool_pm = np.concatenate([pm_cur, pm_cur + val], axis=1)
        pool_s = np.concatenate([s_cur, s_flip], axis=1)
        pool_ref = np.concatenate([ref, ref], axis=1)
        if pool_pm.shape[1] > list_size:
            keep = np.argsort(pool_pm, axis=1, kind="stable")[:, :list_size]
            pm_cur = np.take_along_axis(pool_pm, keep, axis=1)
            s_cur = _gather_rows(pool_s, keep)
            ref = np.take_along_axis(pool_ref, keep, axis=1)
            pruned = True
        else:
            pm_cur, s_cur, ref = pool_pm, pool_s, pool_ref
    return _BatchNodeResult(ref, s_cur, pm_cur, None, rounds, pruned)


def _spc_batch(alpha, pm, list_size, pm_mode) -> _BatchNodeResult:
    """Wagner decode then paired flips keeping even parity.

    The least reliable position is conditionally flipped to repair parity;
    each round flips the next least reliable position together with the
    least reliable one.  Total flips min(L, size) including the repair.
    """
    batch, count, size = alpha.shape
    mag = np.abs(alpha)
    order = np.argsort(mag, axis=2, kind="stable")
    q1 = order[:, :, 0]
    mag_q1 = np.take_along_axis(mag, q1[:, :, None], axis=2)[:, :, 0]
    s_cur = (alpha < 0).astype(np.int8)
    parity = (s_cur.sum(axis=2) & 1).astype(np.int8)
    pm_cur = pm + _codeword_pm_terms(alpha, s_cur, pm_mode) + parity * mag_q1
    idx = q1[:, :, None]
    np.put_along_axis(s_cur, idx,
                      np.take_along_axis(s_cur, idx, axis=2)
                      ^ parity[:, :, None], axis=2)
    q1_flipped = parity.copy()
    ref = np.broadcast_to(np.arange(count), (batch, count)).copy()
    flips = min(list_size, size)
    pruned = False
    for t in range(1, flips):
        pos = np.take_along_axis(order[:, :, t], ref, axis=1)
        mag_ref = _gather_rows(mag, ref)
        val = np.take_along_axis(mag_ref, pos[:, :, None], axis=2)[:, :, 0]
        q1_ref = np.take_along_axis(q1, ref, axis=1)
        val_q1 = np.take_along_axis(mag_ref, q1_ref[:, :, None],
                                    axis=2)[:, :, 0]
        delta = val + (1.0 - 2.0 * q1_flipped) * val_q1
        s_flip = s_cur.copy()
        _flip_at(s_flip, pos)
        _flip_at(s_flip, q1_ref)
        pool_pm = np.concatenate([pm_cur, pm_cur + delta], axis=1)
        pool_s = np.concatenate([s_cur, s_flip], axis=1)
        pool_ref = np.concatenate([ref, ref], axis=1)
        pool_q1 = np.concatenate([q1_flipped, q1_flipped ^ 1], axis=1)
        if pool_pm.shape[1] > list_size:
            keep = np.argsort(pool_pm, axis=1, kind="stable")[:, :list_size]
            pm_cur = np.take_along_axis(pool_pm, keep, axis=1)
            s_cur = _gather_rows(pool_s, keep)
            ref = np.take_along_axis(pool_ref, keep, axis=1)
            q1_flipped = np.take_along_axis(pool_q1, keep, axis=1)
            pruned = True
        else:
            pm_cur, s_cur = pool_pm, pool_s
            ref, q1_flipped = pool_ref, pool_q1
    return _BatchNodeResult(ref, s_cur, pm_cur, None, flips, pruned)


_NODE_DECODERS = {RATE0: _rate0_batch, REP: _rep_batch,
                  RATE1: _rate1_batch, SPC: _spc_batch}


@dataclass
class NodeDecodeResult:
    """Single-frame survivors of one node decode (stable metric order).

    `parent_index` maps survivors to input path rows; `s_hat` is in the
    decode (all-zero-frozen) domain; `flip_count` includes the conditional
    parity repair for parity-check nodes.
    """

    parent_index: np.ndarray
    s_hat: np.ndarray
    path_metrics: np.ndarray
    discarded_metrics: np.ndarray
    flip_count: int = 0
    pruned: bool = False


def _single_frame(kind: str, alpha, parent_pm, list_size,
                  pm_mode) -> NodeDecodeResult:
    alpha = np.atleast_2d(np.asarray(alpha, dtype=np.float64))
    pm = np.atleast_1d(np.asarray(parent_pm, dtype=np.float64))
    res = _NODE_DECODERS[kind](alpha[None], pm[None], list_size, pm_mode)
    parent = res.parent if res.parent.ndim == 1 else res.parent[0]
    dropped = np.empty(0) if res.discarded is None else res.discarded[0]
    return NodeDecodeResult(parent, res.s_hat[0], res.pms[0], dropped,
                            res.flip_count, res.pruned)


def decode_rate0(alpha, parent_pm, pm_mode: str = EXACT) -> NodeDecodeResult:
    """All-frozen node: the all-zeros codeword, no path splitting."""
    return _single_frame(RATE0, alpha, parent_pm, 1 << 30, pm_mode)


def decode_rep(alpha, parent_pm, list_size: int,
               pm_mode: str = EXACT) -> NodeDecodeResult:
    """Repetition node: split into all-zeros and all-ones, keep L best."""
    return _single_frame(REP, alpha, parent_pm, list_size, pm_mode)


def decode_rate1(alpha, parent_pm, list_size: int,
                 pm_mode: str = EXACT) -> NodeDecodeResult:
    """All-information node via reliability-ordered bit flipping."""
    return _single_frame(RATE1, alpha, parent_pm, list_size, pm_mode)


def decode_spc(alpha, parent_pm, list_size: int,
               pm_mode: str = EXACT) -> NodeDecodeResult:
    """Single-parity-check node via Wagner decoding and paired flips."""
    return _single_frame(SPC, alpha, parent_pm, list_size, pm_mode)


class _FastListDecoder:
    """Tree-walking list decoder dispatching leaves to the node decoders."""

    def __init__(self, spec: CodeSpec, list_size: int, tree: DecodingTree,
                 fg_mode: str, pm_mode: str, tracker=None, batch: int = 1,
                 boundary_probe=None):
        if list_size < 1:
            raise ValueError("list size must be >= 1")
        if tree.n_bits != spec.n_bits:
            raise ValueError("tree does not match the code length")
        self.spec = spec
        self.list_size = list_size
        self.tree = tree
        self.fg_mode = fg_mode
        self.pm_mode = pm_mode
        self.tracker = tracker
        self.boundary_probe = boundary_probe or set()
        self.probe_snapshots = {}
        l_cap = min(list_size, 1 << min(spec.n_nonfrozen, 30))
        self.mem = _PathMemory(spec.n_bits, l_cap, batch)
        self.count = 1

    def run(self, channel_llrs: np.ndarray) -> BatchPathLists:
        chan = np.asarray(channel_llrs, dtype=np.float64)
        chan = chan.reshape(-1, self.spec.n_bits)
        self.mem.llr[0] = chan[:, None, :]
        self._descend(self.tree.root)
        return self._finish()

    def _descend(self, node: TreeNode) -> None:
        if node.is_leaf:
            self._decode_leaf(node)
            return
        level = node.level
        half = node.size >> 1
        mem = self.mem
        cur = mem.llr[level]
        rows = self.count if level else 1
        mem.llr[level + 1][:, :self.count] = f_op(
            cur[:, :rows, :half], cur[:, :rows, half:], self.fg_mode)
        self._descend(node.children[0])
        p = self.count
        cur = mem.llr[level]
        rows = p if level else 1
        mem.saved_left[level + 1][:, :p] = mem.out_bits[level + 1][:, :p]
        mem.llr[level + 1][:, :p] = g_op(
            cur[:, :rows, :half], cur[:, :rows, half:],
            mem.saved_left[level + 1][:, :p])
        self._descend(node.children[1])
        p = self.count
        left = mem.saved_left[level + 1][:, :p]
        right = mem.out_bits[level + 1][:, :p]
        mem.out_bits[level][:, :p, :half] = left ^ right
        mem.out_bits[level][:, :p, half:] = right

    def _decode_leaf(self, node: TreeNode) -> None:
        mem = self.mem
        p = self.count
        if node.start in self.boundary_probe:
            self.probe_snapshots[node.start] = np.sort(
                mem.pm[:, :p].ravel())
        alpha = mem.llr[node.level][:, :p] if node.level \
            else mem.llr[0][:, :1]
        s_f = None
        if node.dynamic_positions:
            s_f = self._frozen_pattern(node)
            alpha = modify_llrs_dynamic(alpha, s_f)
        pm = mem.pm[:, :p]
        suffix = self.spec.frozen_suffix_count[node.end]
        parents_before = pm.copy() if (
            self.tracker is not None and node.kind in (RATE1, SPC)) else None
        res = _NODE_DECODERS[node.kind](alpha, pm, self.list_size,
                                        self.pm_mode)
        if self.tracker is not None:
            # the bracket is identically zero only when the survivors cover
            # every valid extension of every parent, which shows in the
            # counts; anything short of that leaves unvisited mass even if
            # no candidate was explicitly dropped
            covered = res.pms.shape[1] == (p << node.info_dim)
            if node.kind == REP and res.discarded is not None:
                self.tracker.add_discarded_paths(
                    res.discarded, suffix, kind=REP,
                    lo=node.start, hi=node.end)
            elif node.kind == RATE1 and not covered:
                self.tracker.add_node_bracket(
                    parents_before, res.pms, suffix, kind=RATE1,
                    lo=node.start, hi=node.end)
            elif node.kind == SPC and not covered:
                lam = frozen_bit_llr(alpha, self.fg_mode)
                parents_zero = parents_before \
                    + pm_increment(lam, 0, self.pm_mode)
                self.tracker.add_node_bracket(
                    parents_zero, res.pms, suffix, kind=SPC,
                    lo=node.start, hi=node.end)
        self._apply(node, res, s_f)

    def _frozen_pattern(self, node: TreeNode) -> np.ndarray:
        """Per-path frozen-pattern codeword looked up from the dynamic
        frozen values of the path prefix."""
        mem = self.mem
        p = self.count
        batch = mem.u.shape[0]
        key = np.zeros((batch, p), dtype=np.int64)
        for r, t in enumerate(node.dynamic_positions):
            vals = (mem.u[:, :p, t - 2] ^ mem.u[:, :p, t - 3]
                    ^ mem.u[:, :p, t - 5] ^ mem.u[:, :p, t - 6])
            mem.u[:, :p, t] = vals
            key |= vals.astype(np.int64) << r
        return node.sf_table[key]

    def _apply(self, node: TreeNode, res: _BatchNodeResult,
               s_f: np.ndarray | None) -> None:
        mem = self.mem
        shared = res.parent.ndim == 1
        count = res.parent.shape[-1]
        if shared:
            if not (count == self.count
                    and np.array_equal(res.parent, np.arange(count))):
                mem.reorder_shared(res.parent)
        else:
            mem.reorder(res.parent)
        s_hat = res.s_hat
        if s_f is not None:
            s_hat = s_hat ^ (s_f[:, res.parent] if shared
                             else _gather_rows(s_f, res.parent))
        mem.pm[:, :count] = res.pms
        mem.out_bits[node.level][:, :count] = s_hat
        mem.u[:, :count, node.start:node.end] = polar_transform(s_hat)
        self.count = count

    def _finish(self) -> BatchPathLists:
        mem = self.mem
        p = self.count
        order = np.argsort(mem.pm[:, :p], axis=1, kind="stable")
        pms = np.take_along_axis(mem.pm[:, :p], order, axis=1)
        u_rows = np.take_along_axis(mem.u[:, :p], order[:, :, None], axis=1)
        codewords = polar_transform(u_rows)
        if self.tracker is not None:
            self.tracker.set_visited_paths(pms)
        return BatchPathLists(pms, u_rows, codewords, self.list_size)


def fscl_decode_batch(spec: CodeSpec, llr_frames: np.ndarray, list_size: int,
                      tree: DecodingTree | None = None, tracker=None, *,
                      fg_mode: str = EXACT,
                      pm_mode: str = EXACT) -> BatchPathLists:
    """Node-based fast list decode of a (batch, N) block of frames."""
    frames = np.asarray(llr_frames, dtype=np.float64)
    if tree is None:
        tree = decompose(spec, spec.max_node_size)
    dec = _FastListDecoder(spec, list_size, tree, fg_mode, pm_mode, tracker,
                           batch=frames.shape[0])
    return dec.run(frames)


def fscl_decode(spec: CodeSpec, llrs, list_size: int,
                tree: DecodingTree | None = None, tracker=None, *,
                fg_mode: str = EXACT, pm_mode: str = EXACT) -> PathList:
    """Node-based fast list decode; same contract as scl_decode.

    Dynamic frozen values are applied per path by sign-adjusting each node's
    LLRs with the looked-up frozen-pattern codeword and re-adding the
    pattern to the estimates afterwards.
    """
    values = np.asarray(llrs.values if hasattr(llrs, "values") else llrs,
                        dtype=np.float64)
    return fscl_decode_batch(spec, values[None, :], list_size, tree, tracker,
                             fg_mode=fg_mode, pm_mode=pm_mode).frame(0)
