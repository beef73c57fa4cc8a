"""Brute-force exact posterior computations on small codes.

Everything enumerates the full codebook (all valid input vectors, dynamic
frozen values honoured), so the dimension is capped.  Used to verify the
list decoders and their soft output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .code_construction import CodeSpec, fill_input, polar_transform

MAX_ORACLE_DIMENSION = 20
_CHUNK = 1 << 14


class OracleLimitError(ValueError):
    """The code dimension is too large to enumerate."""


@dataclass
class OracleResult:
    exact_app_llrs: np.ndarray
    exact_codebook_prob_log: float
    ml_codeword: np.ndarray


def _check_dimension(spec: CodeSpec) -> None:
    if spec.n_nonfrozen > MAX_ORACLE_DIMENSION:
        raise OracleLimitError(
            f"dimension {spec.n_nonfrozen} exceeds the enumeration bound "
            f"{MAX_ORACLE_DIMENSION}")


def _input_basis(spec: CodeSpec) -> np.ndarray:
    """Rows: full input vector generated by each single non-frozen bit.

    The frozen fill is linear in the non-frozen bits (zero maps to zero),
    so any input is the XOR of the rows selected by its bit pattern.
    """
    k = spec.n_nonfrozen
    basis = np.zeros((k, spec.n_bits), dtype=np.int8)
    unit = np.zeros(k, dtype=np.int8)
    for j in range(k):
        unit[j] = 1
        basis[j] = fill_input(spec, unit)
        unit[j] = 0
    return basis


def _codebook_chunks(spec: CodeSpec):
    """Yield (codeword block, info-bit block) over the whole codebook."""
    _check_dimension(spec)
    k = spec.n_nonfrozen
    basis = _input_basis(spec)
    total = 1 << k
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        bits = ((idx[:, None] >> np.arange(k)) & 1).astype(np.int8)
        u = (bits @ basis) & 1
        yield polar_transform(u), bits


def _chunk_log_mass(codewords: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """log posterior mass of each codeword row under channel LLRs lam."""
    log_p0 = -np.logaddexp(0.0, -lam)
    log_p1 = -np.logaddexp(0.0, lam)
    return log_p0.sum() + codewords @ (log_p1 - log_p0)


def _logaddexp_reduce(a: float, values: np.ndarray) -> float:
    peak = values.max()
    return float(np.logaddexp(a, peak + np.log(np.exp(values - peak).sum())))


def exact_codebook_prob(spec: CodeSpec, llrs) -> float:
    """log of the total posterior mass of all valid input vectors."""
    lam = np.asarray(llrs.values if hasattr(llrs, "values") else llrs,
                     dtype=np.float64)
    total = -np.inf
    for codewords, _ in _codebook_chunks(spec):
        total = _logaddexp_reduce(total, _chunk_log_mass(codewords, lam))
    return total


def exact_app_llrs(spec: CodeSpec, llrs, clamp: float = 40.0) -> np.ndarray:
    """Exact per-bit posterior log ratios over the codebook, clamped where
    one bit value never occurs."""
    lam = np.asarray(llrs.values if hasattr(llrs, "values") else llrs,
                     dtype=np.float64)
    mass0 = np.full(spec.n_bits, -np.inf)
    mass1 = np.full(spec.n_bits, -np.inf)
    for codewords, _ in _codebook_chunks(spec):
        logm = _chunk_log_mass(codewords, lam)
        for value, acc in ((0, mass0), (1, mass1)):
            sel = np.where(codewords == value, logm[:, None], -np.inf)
            peak = sel.max(axis=0)
            ok = peak > -np.inf
            col = np.full(spec.n_bits, -np.inf)
            col[ok] = peak[ok] + np.log(
                np.exp(sel[:, ok] - peak[ok]).sum(axis=0))
            np.logaddexp(acc, col, out=acc)
    with np.errstate(invalid="ignore"):
        out = mass0 - mass1
    out[np.isnan(out)] = 0.0
    return np.clip(out, -clamp, clamp)


def ml_decode(spec: CodeSpec, llrs) -> np.ndarray:
    """Most likely codeword; ties break to the lexicographically smallest."""
    lam = np.asarray(llrs.values if hasattr(llrs, "values") else llrs,
                     dtype=np.float64)
    best_mass = -np.inf
    best = None
    for codewords, _ in _codebook_chunks(spec):
        logm = _chunk_log_mass(codewords, lam)
        for i in np.flatnonzero(logm >= best_mass):
            if logm[i] < best_mass:
                continue
            key = np.packbits(codewords[i]).tobytes()
            if best is None or logm[i] > best_mass or key < best[0]:
                best_mass = logm[i]
                best = (key, codewords[i])
    return best[1]


def oracle_result(spec: CodeSpec, llrs, clamp: float = 40.0) -> OracleResult:
    return OracleResult(exact_app_llrs(spec, llrs, clamp),
                        exact_codebook_prob(spec, llrs),
                        ml_decode(spec, llrs))
