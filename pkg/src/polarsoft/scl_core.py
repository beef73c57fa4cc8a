"""LLR-based successive cancellation list decoding over the full bit tree.

The engine carries a leading frame axis so the simulation harness can decode
whole batches in one tree walk (the node schedule and the path-count
evolution depend only on the code, never on the data); the public functions
decode one frame.  Within a frame, lists are vectorized across paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .code_construction import CodeSpec, crc_check, polar_transform

# modes
EXACT = "exact"
MINSUM = "minsum"
HW_APPROX = "hw"

# inputs of magnitude above this are clipped before the atanh-based update.
# The combine itself is overflow-safe at any magnitude; the clamp only
# bounds the dynamic range.  It sits high because clipping misassigns
# e^-clamp of a path's mass, which log-domain ratios can amplify.
LLR_CLAMP = 200.0


def f_op(a, b, mode: str = EXACT):
    """Check-node LLR combine of two incoming messages.

    Exact mode evaluates 2 atanh(tanh(a/2) tanh(b/2)) through an
    overflow-safe identity; min-sum uses sign(a) sign(b) min(|a|, |b|).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if mode == MINSUM:
        return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
    a = np.clip(a, -LLR_CLAMP, LLR_CLAMP)
    b = np.clip(b, -LLR_CLAMP, LLR_CLAMP)
    sgn_min = np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
    return (sgn_min + np.log1p(np.exp(-np.abs(a + b)))
            - np.log1p(np.exp(-np.abs(a - b))))


def g_op(a, b, u):
    """Variable-node LLR update: b + (1 - 2u) a for partial sum bit u."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return b + (1.0 - 2.0 * np.asarray(u)) * a


def pm_increment(lam, u_hat, mode: str = EXACT):
    """Path metric penalty for deciding u_hat on a bit with LLR lam.

    Exact mode returns ln(1 + exp(-(1-2u) lam)) so that exp(-PM) is the
    path posterior; the hardware approximation charges |lam| only when the
    decision contradicts the LLR sign.
    """
    lam = np.asarray(lam, dtype=np.float64)
    signed = (1.0 - 2.0 * np.asarray(u_hat)) * lam
    if mode == HW_APPROX:
        return np.where(signed >= 0.0, 0.0, np.abs(lam))
    return np.logaddexp(0.0, -signed)


@dataclass
class DecoderPath:
    """One finished list entry; list position carries the tie-break."""

    path_metric: float
    u_est: np.ndarray
    codeword: np.ndarray

    def nonfrozen_bits(self, spec: CodeSpec) -> np.ndarray:
        return self.u_est[list(spec.info_set)]


@dataclass
class PathList:
    paths: list
    list_size: int

    def __iter__(self):
        return iter(self.paths)

    def __len__(self):
        return len(self.paths)

    def best(self) -> DecoderPath:
        return self.paths[0]


@dataclass
class BatchPathLists:
    """Finished lists of a whole batch, path-metric sorted per frame."""

    path_metrics: np.ndarray  # (batch, count)
    u_est: np.ndarray         # (batch, count, N)
    codewords: np.ndarray     # (batch, count, N)
    list_size: int

    def frame(self, b: int) -> PathList:
        paths = [DecoderPath(float(self.path_metrics[b, i]),
                             self.u_est[b, i], self.codewords[b, i])
                 for i in range(self.path_metrics.shape[1])]
        return PathList(paths, self.list_size)


class _PathMemory:
    """Per-level LLR and partial-sum storage, (batch, path, position).

    Level 0 holds the shared channel LLRs (path axis of size one) and is
    never reordered.
    """

    def __init__(self, n_bits: int, l_max: int, batch: int):
        self.n_levels = n_bits.bit_length() - 1
        shapes = [(batch, l_max, n_bits >> d)
                  for d in range(self.n_levels + 1)]
        self.llr = [None] + [np.zeros(s) for s in shapes[1:]]
        self.saved_left = [None] + [np.zeros(s, dtype=np.int8)
                                    for s in shapes[1:]]
        self.out_bits = [np.zeros(s, dtype=np.int8) for s in shapes]
        self.u = np.zeros((batch, l_max, n_bits), dtype=np.int8)
        self.pm = np.zeros((batch, l_max))

    def _arrays(self):
        yield from self.llr[1:]
        yield from self.saved_left[1:]
        yield self.u

    def reorder_shared(self, rows: np.ndarray) -> None:
        """Duplicate/permute paths identically in every frame."""
        count = len(rows)
        for arr in self._arrays():
            arr[:, :count] = arr[:, rows]
        self.pm[:, :count] = self.pm[:, rows]

    def reorder(self, rows: np.ndarray) -> None:
        """Per-frame path selection; rows has shape (batch, count)."""
        count = rows.shape[1]
        gather = rows[:, :, None]
        for arr in self._arrays():
            arr[:, :count] = np.take_along_axis(arr, gather, axis=1)
        self.pm[:, :count] = np.take_along_axis(self.pm, rows, axis=1)


class _ListDecoder:
    """Sequential bit-by-bit list decoder shared by SC and SCL."""

    def __init__(self, spec: CodeSpec, list_size: int, fg_mode: str,
                 pm_mode: str, tracker=None, forced_u=None, batch: int = 1,
                 boundary_probe=None):
        if list_size < 1:
            raise ValueError("list size must be >= 1")
        self.spec = spec
        self.list_size = list_size
        self.fg_mode = fg_mode
        self.pm_mode = pm_mode
        self.tracker = tracker
        # optional test hook: bit indices at which to snapshot the sorted
        # metrics of the live paths (batch of one only)
        self.boundary_probe = boundary_probe or set()
        self.probe_snapshots = {}
        self.forced_u = None if forced_u is None else np.asarray(
            forced_u, dtype=np.int8)
        self.frozen = np.zeros(spec.n_bits, dtype=bool)
        self.frozen[list(spec.frozen_set)] = True
        l_cap = min(list_size, 1 << min(spec.n_nonfrozen, 30))
        self.mem = _PathMemory(spec.n_bits, l_cap, batch)
        self.count = 1

    def run(self, channel_llrs: np.ndarray) -> BatchPathLists:
        chan = np.asarray(channel_llrs, dtype=np.float64)
        chan = chan.reshape(-1, self.spec.n_bits)
        self.mem.llr[0] = chan[:, None, :]
        self._descend(0, 0)
        return self._finish()

    # tree walk, f stage before the left child and g stage before the right
    def _descend(self, level: int, lo: int) -> None:
        span = self.spec.n_bits >> level
        if span == 1:
            self._decide_bit(lo)
            return
        half = span >> 1
        mem = self.mem
        cur = mem.llr[level]
        rows = self.count if level else 1
        mem.llr[level + 1][:, :self.count] = f_op(
            cur[:, :rows, :half], cur[:, :rows, half:], self.fg_mode)
        self._descend(level + 1, lo)
        p = self.count
        cur = mem.llr[level]
        rows = p if level else 1
        mem.saved_left[level + 1][:, :p] = mem.out_bits[level + 1][:, :p]
        mem.llr[level + 1][:, :p] = g_op(
            cur[:, :rows, :half], cur[:, :rows, half:],
            mem.saved_left[level + 1][:, :p])
        self._descend(level + 1, lo + half)
        p = self.count
        left = mem.saved_left[level + 1][:, :p]
        right = mem.out_bits[level + 1][:, :p]
        mem.out_bits[level][:, :p, :half] = left ^ right
        mem.out_bits[level][:, :p, half:] = right

    def _decide_bit(self, t: int) -> None:
        mem = self.mem
        p = self.count
        if t in self.boundary_probe:
            self.probe_snapshots[t] = np.sort(mem.pm[:, :p].ravel())
        top = mem.n_levels
        lam = mem.llr[top][:, :p, 0]
        if self.forced_u is not None:
            bits = np.broadcast_to(np.int8(self.forced_u[t]), lam.shape)
        elif self.frozen[t]:
            bits = self._frozen_values(t)
        else:
            self._split_bit(t, lam)
            return
        mem.pm[:, :p] += pm_increment(lam, bits, self.pm_mode)
        mem.u[:, :p, t] = bits
        mem.out_bits[top][:, :p, 0] = bits

    def _frozen_values(self, t: int) -> np.ndarray:
        p = self.count
        if t in self.spec.dynamic_positions:
            u = self.mem.u
            return (u[:, :p, t - 2] ^ u[:, :p, t - 3]
                    ^ u[:, :p, t - 5] ^ u[:, :p, t - 6])
        return np.zeros((self.mem.u.shape[0], p), dtype=np.int8)

    def _split_bit(self, t: int, lam: np.ndarray) -> None:
        # candidates interleaved parent-major: index c is parent c//2, bit c&1
        mem = self.mem
        p = self.count
        cand_pm = np.empty((lam.shape[0], 2 * p))
        cand_pm[:, 0::2] = mem.pm[:, :p] + pm_increment(lam, 0, self.pm_mode)
        cand_pm[:, 1::2] = mem.pm[:, :p] + pm_increment(lam, 1, self.pm_mode)
        top = mem.n_levels
        if 2 * p <= self.list_size:
            bits = np.tile(np.array([0, 1], dtype=np.int8), p)
            mem.reorder_shared(np.repeat(np.arange(p), 2))
            mem.pm[:, :2 * p] = cand_pm
            mem.u[:, :2 * p, t] = bits
            mem.out_bits[top][:, :2 * p, 0] = bits
            self.count = 2 * p
            return
        order = np.argsort(cand_pm, axis=1, kind="stable")
        keep = order[:, :self.list_size]
        if self.tracker is not None:
            dropped = np.take_along_axis(cand_pm, order[:, self.list_size:],
                                         axis=1)
            self.tracker.add_discarded_paths(
                dropped, self.spec.frozen_suffix_count[t + 1],
                kind="bit", lo=t, hi=t + 1)
        bits = (keep & 1).astype(np.int8)
        mem.reorder(keep >> 1)
        count = keep.shape[1]
        mem.pm[:, :count] = np.take_along_axis(cand_pm, keep, axis=1)
        mem.u[:, :count, t] = bits
        mem.out_bits[top][:, :count, 0] = bits
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


def scl_decode_batch(spec: CodeSpec, llr_frames: np.ndarray, list_size: int,
                     tracker=None, *, fg_mode: str = EXACT,
                     pm_mode: str = EXACT) -> BatchPathLists:
    """Decode a (batch, N) block of frames in one pass.

    Per-frame results are bit-identical to decoding frames one at a time;
    `tracker` must handle batched reports (see soft_output.BatchTracker).
    """
    frames = np.asarray(llr_frames, dtype=np.float64)
    dec = _ListDecoder(spec, list_size, fg_mode, pm_mode, tracker,
                       batch=frames.shape[0])
    return dec.run(frames)


def scl_decode(spec: CodeSpec, llrs, list_size: int, tracker=None, *,
               fg_mode: str = EXACT, pm_mode: str = EXACT) -> PathList:
    """List-decode a frame of channel LLRs, lowest path metric first.

    Frozen positions are forced (static zero or the dynamic XOR value of the
    path prefix); every information position splits each path in two and the
    list keeps the L lowest-metric candidates with stable tie-breaking.
    Discarded candidates are reported to `tracker` when one is given.
    """
    values = np.asarray(llrs.values if hasattr(llrs, "values") else llrs,
                        dtype=np.float64)
    return scl_decode_batch(spec, values[None, :], list_size, tracker,
                            fg_mode=fg_mode, pm_mode=pm_mode).frame(0)


def forced_path_metric(spec: CodeSpec, llrs, u, *, fg_mode: str = EXACT,
                       pm_mode: str = EXACT) -> float:
    """Path metric of one fully specified input vector u (no splitting)."""
    values = np.asarray(llrs.values if hasattr(llrs, "values") else llrs,
                        dtype=np.float64)
    dec = _ListDecoder(spec, 1, fg_mode, pm_mode, forced_u=u)
    return dec.run(values[None, :]).frame(0).paths[0].path_metric


def crc_select(paths: PathList, spec: CodeSpec):
    """Best CRC-passing path, or the metric-best path with a failure flag.

    Returns (path, crc_ok).
    """
    if not spec.crc_len:
        raise ValueError("code has no CRC configured")
    for path in paths:
        if crc_check(path.nonfrozen_bits(spec), spec.crc_len):
            return path, True
    return paths.best(), False
