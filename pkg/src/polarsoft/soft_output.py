"""Codebook-probability tracking and bit-wise APP LLRs for list decoders.

The tracker accumulates, in the log domain, the posterior mass of the leaves
a list decoder visited plus an estimate of the mass in the subtrees it pruned.
Each pruned subtree rooted after bit i contributes its root path mass scaled
by 2^-(number of frozen positions still ahead); subtrees pruned for violating
a frozen constraint carry no mass and are never reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .code_construction import CodeSpec, RATE1, REP, SPC
from .scl_core import EXACT, PathList, crc_select, scl_decode

LN2 = math.log(2.0)
APP_LLR_CLAMP = 40.0

# tolerated floating-point cancellation in the pruned-mass brackets
BRACKET_TOL = 1e-9


class ResidualError(RuntimeError):
    """A pruned-mass bracket came out negative beyond tolerance, which means
    the survivor masses exceeded their parents' mass (inconsistent PMs)."""


def _logsumexp(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        return -np.inf
    peak = values.max()
    if peak == -np.inf:
        return -np.inf
    return float(peak + np.log(np.exp(values - peak).sum()))


def _logsumexp_rows(values: np.ndarray) -> np.ndarray:
    """Row-wise log-sum-exp of a (batch, count) array."""
    if values.shape[1] == 0:
        return np.full(values.shape[0], -np.inf)
    peak = values.max(axis=1)
    shift = np.where(np.isneginf(peak), 0.0, peak)
    with np.errstate(divide="ignore"):
        out = shift + np.log(np.exp(values - shift[:, None]).sum(axis=1))
    return np.where(np.isneginf(peak), -np.inf, out)


def _log_diff_exp(a: float, b: float) -> float:
    """log(e^a - e^b) for a > b, -inf when the difference is non-positive."""
    if b == -np.inf:
        return a
    if b >= a:
        return -np.inf
    return a + math.log1p(-math.exp(b - a))


def _log_diff_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.full(a.shape, -np.inf)
    ok = b < a
    out[ok] = a[ok] + np.log1p(-np.exp(b[ok] - a[ok]))
    return out


def _lin(x: float) -> float:
    return 0.0 if x == -np.inf else math.exp(x)


@dataclass
class ResidualEvent:
    """Audit record for one pruned-mass report."""

    kind: str
    lo: int
    hi: int
    log_mass: float
    bracket: float | None = None


@dataclass
class CodebookProbTracker:
    """Log-domain accumulators for visited and pruned posterior mass."""

    audit: bool = False
    bracket_tol: float = BRACKET_TOL
    visited_mass_log: float = -np.inf
    unvisited_mass_log: float = -np.inf
    events: list = field(default_factory=list)

    def set_visited_paths(self, pms) -> None:
        self.visited_mass_log = _logsumexp(-np.asarray(pms, dtype=np.float64))

    def add_discarded_paths(self, pms, n_frozen_after: int, kind: str = "bit",
                            lo: int = -1, hi: int = -1) -> None:
        """Add pruned subtree roots with metrics `pms`, each weighted by
        2^-n_frozen_after."""
        pms = np.asarray(pms, dtype=np.float64)
        if pms.size == 0:
            return
        log_mass = _logsumexp(-pms) - n_frozen_after * LN2
        self.unvisited_mass_log = np.logaddexp(self.unvisited_mass_log,
                                               log_mass)
        if self.audit:
            self.events.append(ResidualEvent(kind, lo, hi, log_mass))

    def add_node_bracket(self, parent_pms, survivor_pms, n_frozen_after: int,
                         kind: str, lo: int, hi: int) -> None:
        """Add (parent mass - survivor mass) * 2^-n_frozen_after, clamped at
        zero; raises ResidualError when the bracket is negative beyond
        tolerance."""
        a = _logsumexp(-np.asarray(parent_pms, dtype=np.float64))
        b = _logsumexp(-np.asarray(survivor_pms, dtype=np.float64))
        bracket = _lin(a) - _lin(b)
        if bracket < -self.bracket_tol:
            raise ResidualError(
                f"{kind} node [{lo},{hi}): survivor mass exceeds parent mass "
                f"by {-bracket:.3e}")
        log_mass = _log_diff_exp(a, b) - n_frozen_after * LN2
        self.unvisited_mass_log = np.logaddexp(self.unvisited_mass_log,
                                               log_mass)
        if self.audit:
            self.events.append(ResidualEvent(kind, lo, hi, log_mass, bracket))

    def total_log(self) -> float:
        return float(np.logaddexp(self.visited_mass_log,
                                  self.unvisited_mass_log))


class BatchTracker:
    """Per-frame visited/pruned mass accumulators for batched decoding.

    Same reporting interface as CodebookProbTracker, with (batch, count)
    metric arrays instead of flat ones.
    """

    def __init__(self, batch: int, bracket_tol: float = BRACKET_TOL):
        self.visited_mass_log = np.full(batch, -np.inf)
        self.unvisited_mass_log = np.full(batch, -np.inf)
        self.bracket_tol = bracket_tol

    def set_visited_paths(self, pms: np.ndarray) -> None:
        self.visited_mass_log = _logsumexp_rows(-pms)

    def add_discarded_paths(self, pms: np.ndarray, n_frozen_after: int,
                            kind: str = "bit", lo: int = -1,
                            hi: int = -1) -> None:
        if pms.shape[1] == 0:
            return
        contribution = _logsumexp_rows(-pms) - n_frozen_after * LN2
        np.logaddexp(self.unvisited_mass_log, contribution,
                     out=self.unvisited_mass_log)

    def add_node_bracket(self, parent_pms: np.ndarray,
                         survivor_pms: np.ndarray, n_frozen_after: int,
                         kind: str, lo: int, hi: int) -> None:
        a = _logsumexp_rows(-parent_pms)
        b = _logsumexp_rows(-survivor_pms)
        bracket = np.exp(a) - np.exp(b)
        worst = bracket.min() if bracket.size else 0.0
        if worst < -self.bracket_tol:
            raise ResidualError(
                f"{kind} node [{lo},{hi}): survivor mass exceeds parent "
                f"mass by {-worst:.3e}")
        contribution = _log_diff_rows(a, b) - n_frozen_after * LN2
        np.logaddexp(self.unvisited_mass_log, contribution,
                     out=self.unvisited_mass_log)

    def totals(self) -> np.ndarray:
        return np.logaddexp(self.visited_mass_log, self.unvisited_mass_log)


def report_scl_discard(tracker: CodebookProbTracker, pm: float, i: int,
                       spec: CodeSpec) -> None:
    """Report one path discarded while splitting on 0-based info bit i."""
    tracker.add_discarded_paths(np.array([pm]),
                                spec.frozen_suffix_count[i + 1],
                                kind="bit", lo=i, hi=i + 1)


def node_residual_rep(tracker, discarded_pms, node, spec: CodeSpec) -> None:
    """Pruned-root mass of a repetition node (roots sit at the node end)."""
    tracker.add_discarded_paths(np.asarray(discarded_pms, dtype=np.float64),
                                spec.frozen_suffix_count[node.end],
                                kind=REP, lo=node.start, hi=node.end)


def node_residual_rate1(tracker, parent_pms, survivor_pms, node,
                        spec: CodeSpec) -> None:
    """Unvisited mass of an all-information node: parents minus survivors."""
    tracker.add_node_bracket(parent_pms, survivor_pms,
                             spec.frozen_suffix_count[node.end],
                             kind=RATE1, lo=node.start, hi=node.end)


def node_residual_spc(tracker, parent_pms_with_frozen_bit, survivor_pms, node,
                      spec: CodeSpec) -> None:
    """Unvisited mass of a single-parity-check node.

    Parent metrics must already include the penalty for deciding the node's
    frozen bit to zero.
    """
    tracker.add_node_bracket(parent_pms_with_frozen_bit, survivor_pms,
                             spec.frozen_suffix_count[node.end],
                             kind=SPC, lo=node.start, hi=node.end)


def total_codebook_prob(tracker: CodebookProbTracker) -> float:
    """log of the estimated codebook probability (visited plus pruned mass).

    All-frozen nodes never split paths, so they contribute nothing here.
    """
    return tracker.total_log()


def _masked_columns_lse(log_weights: np.ndarray, mask: np.ndarray,
                        extra_row: np.ndarray) -> np.ndarray:
    rows = np.where(mask, log_weights[:, None], -np.inf)
    rows = np.vstack([rows, extra_row[None, :]])
    peak = rows.max(axis=0)
    out = np.full(rows.shape[1], -np.inf)
    ok = peak > -np.inf
    if np.any(ok):
        out[ok] = peak[ok] + np.log(
            np.exp(rows[:, ok] - peak[ok]).sum(axis=0))
    return out


def app_llrs(candidates, codebook_prob_log: float, llrs,
             clamp: float = APP_LLR_CLAMP) -> np.ndarray:
    """Bit-wise APP LLRs from a candidate list and the codebook probability.

    Candidate mass is split per bit value; the leftover mass (codebook
    probability minus total candidate mass, floored at zero) is apportioned
    by the per-bit channel posterior.  Output is clamped to +-clamp.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    lam = np.asarray(llrs.values if hasattr(llrs, "values") else llrs,
                     dtype=np.float64)
    codewords = np.stack([np.asarray(c, dtype=np.int8)
                          for c, _ in candidates])
    log_w = -np.array([pm for _, pm in candidates], dtype=np.float64)
    residual_log = _log_diff_exp(codebook_prob_log, _logsumexp(log_w))
    log_p0 = -np.logaddexp(0.0, -lam)
    log_p1 = -np.logaddexp(0.0, lam)
    num = _masked_columns_lse(log_w, codewords == 0, residual_log + log_p0)
    den = _masked_columns_lse(log_w, codewords == 1, residual_log + log_p1)
    with np.errstate(invalid="ignore"):
        out = num - den
    out[np.isnan(out)] = 0.0
    return np.clip(out, -clamp, clamp)


def pyndiah_llrs(candidates, clamp_beta: float = APP_LLR_CLAMP) -> np.ndarray:
    """List-only APP estimate; bits absent from one side saturate to the
    clamp."""
    if not candidates:
        raise ValueError("need at least one candidate")
    codewords = np.stack([np.asarray(c, dtype=np.int8)
                          for c, _ in candidates])
    log_w = -np.array([pm for _, pm in candidates], dtype=np.float64)
    empty = np.full(codewords.shape[1], -np.inf)
    num = _masked_columns_lse(log_w, codewords == 0, empty)
    den = _masked_columns_lse(log_w, codewords == 1, empty)
    with np.errstate(invalid="ignore"):
        out = num - den
    out[np.isnan(out)] = 0.0
    return np.clip(out, -clamp_beta, clamp_beta)


def merge_candidates(paths: PathList):
    """(codeword, pm) pairs with duplicate codewords merged by mass addition,
    sorted by metric."""
    by_key: dict = {}
    for path in paths:
        key = path.codeword.tobytes()
        if key in by_key:
            cw, pm = by_key[key]
            by_key[key] = (cw, float(-np.logaddexp(-pm, -path.path_metric)))
        else:
            by_key[key] = (path.codeword, path.path_metric)
    return sorted(by_key.values(), key=lambda t: t[1])


@dataclass
class SoftDecodeOutput:
    """APP LLRs plus the hard decision artifacts of one soft decode."""

    app_llrs: np.ndarray
    codebook_prob_log: float | None
    candidates: list
    best_codeword: np.ndarray
    best_path: object
    crc_ok: bool | None
    tracker: CodebookProbTracker | None = None


def _assemble(spec: CodeSpec, llrs, paths: PathList,
              tracker: CodebookProbTracker | None, clamp: float,
              pyndiah: bool = False) -> SoftDecodeOutput:
    cands = merge_candidates(paths)
    if pyndiah:
        soft = pyndiah_llrs(cands, clamp)
        cbp = None
    else:
        cbp = tracker.total_log()
        soft = app_llrs(cands, cbp, llrs, clamp)
    if spec.crc_len:
        best, crc_ok = crc_select(paths, spec)
    else:
        best, crc_ok = paths.best(), None
    return SoftDecodeOutput(app_llrs=soft, codebook_prob_log=cbp,
                            candidates=cands, best_codeword=best.codeword,
                            best_path=best, crc_ok=crc_ok, tracker=tracker)


def so_scl_decode(spec: CodeSpec, llrs, list_size: int, *,
                  clamp: float = APP_LLR_CLAMP, fg_mode: str = EXACT,
                  pm_mode: str = EXACT, audit: bool = False,
                  bracket_tol: float = BRACKET_TOL) -> SoftDecodeOutput:
    """Soft-output decode on the bit-by-bit list decoder."""
    tracker = CodebookProbTracker(audit=audit, bracket_tol=bracket_tol)
    paths = scl_decode(spec, llrs, list_size, tracker,
                       fg_mode=fg_mode, pm_mode=pm_mode)
    return _assemble(spec, llrs, paths, tracker, clamp)


def so_fscl_decode(spec: CodeSpec, llrs, list_size: int, tree=None, *,
                   clamp: float = APP_LLR_CLAMP, fg_mode: str = EXACT,
                   pm_mode: str = EXACT, audit: bool = False,
                   bracket_tol: float = BRACKET_TOL) -> SoftDecodeOutput:
    """Soft-output decode on the node-based fast list decoder."""
    from .fscl_core import fscl_decode
    from .node_tree import decompose
    if tree is None:
        tree = decompose(spec, spec.max_node_size)
    tracker = CodebookProbTracker(audit=audit, bracket_tol=bracket_tol)
    paths = fscl_decode(spec, llrs, list_size, tree, tracker,
                        fg_mode=fg_mode, pm_mode=pm_mode)
    return _assemble(spec, llrs, paths, tracker, clamp)


def pyndiah_decode(spec: CodeSpec, llrs, list_size: int, *,
                   clamp_beta: float = APP_LLR_CLAMP, fg_mode: str = EXACT,
                   pm_mode: str = EXACT) -> SoftDecodeOutput:
    """List decode plus the saturated list-only APP approximation."""
    paths = scl_decode(spec, llrs, list_size,
                       fg_mode=fg_mode, pm_mode=pm_mode)
    return _assemble(spec, llrs, paths, None, clamp_beta, pyndiah=True)


def _masked_lse_batch(log_w: np.ndarray, mask: np.ndarray,
                      extra: np.ndarray) -> np.ndarray:
    """Per-bit log-sum-exp of masked candidate weights plus one extra row;
    shapes (B, M), (B, M, N), (B, N) -> (B, N)."""
    rows = np.where(mask, log_w[:, :, None], -np.inf)
    rows = np.concatenate([rows, extra[:, None, :]], axis=1)
    peak = rows.max(axis=1)
    shift = np.where(np.isneginf(peak), 0.0, peak)
    with np.errstate(divide="ignore"):
        out = shift + np.log(np.exp(rows - shift[:, None, :]).sum(axis=1))
    return np.where(np.isneginf(peak), -np.inf, out)


def app_llrs_batch(codewords: np.ndarray, pms: np.ndarray,
                   codebook_prob_log: np.ndarray, llr_frames: np.ndarray,
                   clamp: float = APP_LLR_CLAMP) -> np.ndarray:
    """Batched APP LLRs; candidates per frame must be distinct codewords."""
    log_w = -pms
    residual = _log_diff_rows(codebook_prob_log, _logsumexp_rows(log_w))
    log_p0 = -np.logaddexp(0.0, -llr_frames)
    log_p1 = -np.logaddexp(0.0, llr_frames)
    num = _masked_lse_batch(log_w, codewords == 0,
                            residual[:, None] + log_p0)
    den = _masked_lse_batch(log_w, codewords == 1,
                            residual[:, None] + log_p1)
    with np.errstate(invalid="ignore"):
        out = num - den
    out[np.isnan(out)] = 0.0
    return np.clip(out, -clamp, clamp)


def pyndiah_llrs_batch(codewords: np.ndarray, pms: np.ndarray,
                       clamp_beta: float = APP_LLR_CLAMP) -> np.ndarray:
    log_w = -pms
    empty = np.full((codewords.shape[0], codewords.shape[2]), -np.inf)
    num = _masked_lse_batch(log_w, codewords == 0, empty)
    den = _masked_lse_batch(log_w, codewords == 1, empty)
    with np.errstate(invalid="ignore"):
        out = num - den
    out[np.isnan(out)] = 0.0
    return np.clip(out, -clamp_beta, clamp_beta)


@dataclass
class BatchSoftOutput:
    """Soft decode results of a whole batch."""

    app_llrs: np.ndarray            # (B, N)
    hard_decisions: np.ndarray      # (B, N) signs of the APP LLRs
    codebook_prob_log: np.ndarray | None
    best_codeword: np.ndarray       # (B, N)
    best_nonfrozen: np.ndarray      # (B, K + crc)
    crc_ok: np.ndarray | None


def _pick_best_batch(spec: CodeSpec, lists) -> tuple:
    from .code_construction import crc_check_batch
    nonfrozen = lists.u_est[:, :, list(spec.info_set)]
    if spec.crc_len:
        passing = crc_check_batch(nonfrozen, spec.crc_len)
        pick = np.where(passing.any(axis=1), passing.argmax(axis=1), 0)
        crc_ok = passing.any(axis=1)
    else:
        pick = np.zeros(lists.path_metrics.shape[0], dtype=np.int64)
        crc_ok = None
    best_cw = np.take_along_axis(lists.codewords, pick[:, None, None],
                                 axis=1)[:, 0]
    best_nf = np.take_along_axis(nonfrozen, pick[:, None, None],
                                 axis=1)[:, 0]
    return best_cw, best_nf, crc_ok


def soft_decode_batch(spec: CodeSpec, llr_frames: np.ndarray,
                      list_size: int, engine: str = "scl", tree=None, *,
                      clamp: float = APP_LLR_CLAMP, fg_mode: str = EXACT,
                      pm_mode: str = EXACT) -> BatchSoftOutput:
    """Soft-output decode of a (batch, N) block on either list engine.

    Per-frame numbers are identical to the single-frame functions; list
    candidates are distinct by construction, so no duplicate merge is
    needed here.
    """
    from .fscl_core import fscl_decode_batch
    from .scl_core import scl_decode_batch
    frames = np.asarray(llr_frames, dtype=np.float64)
    tracker = BatchTracker(frames.shape[0])
    if engine == "fscl":
        lists = fscl_decode_batch(spec, frames, list_size, tree, tracker,
                                  fg_mode=fg_mode, pm_mode=pm_mode)
    elif engine == "scl":
        lists = scl_decode_batch(spec, frames, list_size, tracker,
                                 fg_mode=fg_mode, pm_mode=pm_mode)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    cbp = tracker.totals()
    app = app_llrs_batch(lists.codewords, lists.path_metrics, cbp, frames,
                         clamp)
    best_cw, best_nf, crc_ok = _pick_best_batch(spec, lists)
    return BatchSoftOutput(app_llrs=app,
                           hard_decisions=(app < 0).astype(np.int8),
                           codebook_prob_log=cbp, best_codeword=best_cw,
                           best_nonfrozen=best_nf, crc_ok=crc_ok)


def pyndiah_decode_batch(spec: CodeSpec, llr_frames: np.ndarray,
                         list_size: int, *,
                         clamp_beta: float = APP_LLR_CLAMP,
                         fg_mode: str = EXACT,
                         pm_mode: str = EXACT) -> BatchSoftOutput:
    """Batched list decode plus the saturated list-only APP estimate."""
    from .scl_core import scl_decode_batch
    frames = np.asarray(llr_frames, dtype=np.float64)
    lists = scl_decode_batch(spec, frames, list_size,
                             fg_mode=fg_mode, pm_mode=pm_mode)
    app = pyndiah_llrs_batch(lists.codewords, lists.path_metrics, clamp_beta)
    best_cw, best_nf, crc_ok = _pick_best_batch(spec, lists)
    return BatchSoftOutput(app_llrs=app,
                           hard_decisions=(app < 0).astype(np.int8),
                           codebook_prob_log=None, best_codeword=best_cw,
                           best_nonfrozen=best_nf, crc_ok=crc_ok)
