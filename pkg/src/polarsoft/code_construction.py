"""Polar code construction, encoding, CRC attachment and dynamic frozen bits.

All indices are 0-based internally.  Where docs elsewhere speak of bit
positions 1..N, subtract one.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from importlib import resources

import numpy as np

SEQ_PATH_ENV = "POLARSOFT_SEQ_PATH"

# frozen-value rules
ALL_STATIC = "static"
XOR_RULE = "xor"

# constructions
FIVE_G = "5g"
POLAR_WEIGHT = "pw"
GAUSSIAN_APPROX = "ga"

# u_t = u_{t-2} ^ u_{t-3} ^ u_{t-5} ^ u_{t-6} for dynamic frozen t (t >= 6)
_XOR_TAPS = (2, 3, 5, 6)

# CRC generator polynomials, MSB first (x^6+x^5+1 and x^11+x^10+x^9+x^5+1)
CRC_POLYS = {
    6: np.array([1, 1, 0, 0, 0, 0, 1], dtype=np.int8),
    11: np.array([1, 1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1], dtype=np.int8),
}

# node kinds shared with the tree decomposition
BRANCH = "branch"
RATE0 = "rate0"
REP = "rep"
RATE1 = "rate1"
SPC = "spc"


class ConstructionError(ValueError):
    """Raised for invalid code parameters."""


def polar_transform(bits: np.ndarray) -> np.ndarray:
    """Apply the length-N polar transform over GF(2) along the last axis.

    The transform is its own inverse, so this converts input vectors to
    codewords and back.  N must be a power of two.  Works on batches.
    """
    x = np.array(bits, dtype=np.int8, copy=True)
    n_bits = x.shape[-1]
    if n_bits & (n_bits - 1):
        raise ConstructionError(f"length {n_bits} is not a power of two")
    h = 1
    while h < n_bits:
        shaped = x.reshape(-1, n_bits // (2 * h), 2, h)
        shaped[..., 0, :] ^= shaped[..., 1, :]
        h *= 2
    return x.reshape(np.shape(bits))


def crc_compute(payload: np.ndarray, crc_len: int) -> np.ndarray:
    """Remainder of payload * x^crc_len divided by the generator polynomial.

    Zero initial register; the remainder is appended after the payload.
    """
    if crc_len not in CRC_POLYS:
        raise ConstructionError(f"unsupported CRC length {crc_len}")
    poly = CRC_POLYS[crc_len]
    reg = np.concatenate([np.asarray(payload, dtype=np.int8) % 2,
                          np.zeros(crc_len, dtype=np.int8)])
    for i in range(len(reg) - crc_len):
        if reg[i]:
            reg[i:i + crc_len + 1] ^= poly
    return reg[-crc_len:]


def crc_check(bits: np.ndarray, crc_len: int) -> bool:
    """True when the trailing crc_len bits match the payload checksum."""
    bits = np.asarray(bits, dtype=np.int8)
    expect = crc_compute(bits[:-crc_len], crc_len)
    return bool(np.array_equal(expect, bits[-crc_len:]))


def crc_check_batch(bits: np.ndarray, crc_len: int) -> np.ndarray:
    """Vectorized crc_check over the leading axes of (..., payload+crc)."""
    if crc_len not in CRC_POLYS:
        raise ConstructionError(f"unsupported CRC length {crc_len}")
    poly = CRC_POLYS[crc_len]
    reg = np.asarray(bits, dtype=np.int8) % 2
    reg = reg.copy()
    # payload || crc divides evenly by the generator iff the CRC matches
    for i in range(reg.shape[-1] - crc_len):
        reg[..., i:i + crc_len + 1] ^= poly * reg[..., i:i + 1]
    return ~reg[..., -crc_len:].any(axis=-1)


def classify_mask(frozen_mask) -> str:
    """Classify a frozen-position mask (1 = frozen) into a node kind."""
    mask = np.asarray(frozen_mask, dtype=np.int8)
    size = mask.size
    n_frozen = int(mask.sum())
    if n_frozen == size:
        return RATE0
    if n_frozen == 0:
        return RATE1
    if size >= 2 and n_frozen == size - 1 and mask[-1] == 0:
        return REP
    if size >= 2 and n_frozen == 1 and mask[0] == 1:
        return SPC
    return BRANCH


def special_spans(frozen_mask, max_node_size: int | None = None):
    """Greedy decomposition of a frozen mask into special spans.

    Returns (lo, hi, kind) half-open spans in index order.  A span becomes a
    leaf at the largest power-of-two size (up to max_node_size) whose mask is
    one of the four special patterns; otherwise it splits into halves.
    """
    mask = np.asarray(frozen_mask, dtype=np.int8)
    cap = mask.size if max_node_size is None else max_node_size
    spans = []

    def descend(lo, hi):
        kind = classify_mask(mask[lo:hi])
        if kind != BRANCH and (hi - lo) <= cap:
            spans.append((lo, hi, kind))
            return
        mid = (lo + hi) // 2
        descend(lo, mid)
        descend(mid, hi)

    descend(0, mask.size)
    return spans


@dataclass(frozen=True, eq=False)
class CodeSpec:
    """Immutable polar code description shared by encoder and decoders."""

    n_bits: int
    k_info: int
    info_set: tuple
    frozen_set: tuple
    frozen_suffix_count: np.ndarray  # entry t = number of frozen indices >= t
    dynamic_rule: str
    f_d: int
    crc_len: int
    dynamic_positions: frozenset
    construction: str
    max_node_size: int

    @property
    def n_nonfrozen(self) -> int:
        return self.k_info + self.crc_len

    @property
    def rate(self) -> float:
        return self.k_info / self.n_bits

    def frozen_mask(self) -> np.ndarray:
        mask = np.ones(self.n_bits, dtype=np.int8)
        mask[list(self.info_set)] = 0
        return mask

    def validate(self) -> None:
        n, k = self.n_bits, self.n_nonfrozen
        if n < 2 or n & (n - 1):
            raise ConstructionError(f"N={n} is not a power of two >= 2")
        if len(self.info_set) != k or len(self.frozen_set) != n - k:
            raise ConstructionError("info/frozen set sizes are inconsistent")
        if set(self.info_set) & set(self.frozen_set):
            raise ConstructionError("info and frozen sets overlap")
        if set(self.info_set) | set(self.frozen_set) != set(range(n)):
            raise ConstructionError("info and frozen sets do not cover 0..N-1")
        sfc = self.frozen_suffix_count
        if sfc[n] != 0 or np.any(np.diff(sfc) > 0):
            raise ConstructionError("frozen_suffix_count is not a suffix count")


def load_reliability_sequence(path: str | None = None) -> np.ndarray:
    """Load a reliability sequence (one index per line, most reliable last).

    Defaults to the packaged length-1024 sequence; the POLARSOFT_SEQ_PATH
    environment variable overrides it.
    """
    if path is None:
        path = os.environ.get(SEQ_PATH_ENV)
    if path is None:
        text = resources.files("polarsoft.data").joinpath(
            "nr_reliability_1024.txt").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    seq = np.array([int(line) for line in text.split()], dtype=np.int64)
    if sorted(seq) != list(range(len(seq))):
        raise ConstructionError("sequence is not a permutation of 0..N-1")
    return seq


def _pw_reliability_order(n_bits: int) -> np.ndarray:
    """Index order by ascending polarization weight (beta expansion).

    w(i) = sum over set bits j of i of beta^j with beta = 2^(1/4); ties are
    broken by index.
    """
    beta = 2.0 ** 0.25
    stages = n_bits.bit_length() - 1
    weights = np.zeros(n_bits)
    for j in range(stages):
        sel = (np.arange(n_bits) >> j) & 1
        weights += sel * beta ** j
    return np.array(sorted(range(n_bits), key=lambda i: (weights[i], i)))


def _ga_phi(x: float) -> float:
    if x == 0.0:
        return 1.0
    if x < 10.0:
        return math.exp(-0.4527 * x ** 0.86 + 0.0218)
    return math.sqrt(math.pi / x) * math.exp(-x / 4) * (1 - 10 / (7 * x))


def _ga_phi_inv(y: float) -> float:
    lo, hi = 0.0, 1.0
    while _ga_phi(hi) > y:
        hi *= 2
        if hi > 1e9:
            return hi
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if _ga_phi(mid) > y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _ga_reliability_order(n_bits: int, design_snr_db: float,
                          rate: float) -> np.ndarray:
    """Index order by ascending bit-channel LLR mean (Gaussian approximation).

    Natural (non-bit-reversed) indexing matching polar_transform.
    """
    sigma2 = 1.0 / (2.0 * rate * 10.0 ** (design_snr_db / 10.0))
    means = np.full(n_bits, 2.0 / sigma2)
    n = n_bits.bit_length() - 1
    for level in range(n):
        step = 2 << level
        half = step >> 1
        for base in range(0, n_bits, step):
            block = means[base:base + half].copy()
            for k, mu in enumerate(block):
                y = _ga_phi(mu)
                means[base + k] = _ga_phi_inv(1.0 - (1.0 - y) ** 2)
                means[base + half + k] = 2.0 * mu
    return np.array(sorted(range(n_bits), key=lambda i: (means[i], i)))


def _dynamic_positions(frozen_mask: np.ndarray, f_d: int,
                       max_node_size: int) -> frozenset:
    """Dynamic frozen positions: the first min(f_d, |F_s|) frozen indices of
    every special span, restricted to global index >= 6."""
    if f_d <= 0:
        return frozenset()
    out = set()
    for lo, hi, kind in special_spans(frozen_mask, max_node_size):
        frozen_here = [t for t in range(lo, hi) if frozen_mask[t]]
        out.update(t for t in frozen_here[:f_d] if t >= 6)
    return frozenset(out)


def build_code_spec(n_bits: int, k_info: int, crc_len: int = 0,
                    dynamic_rule: str = ALL_STATIC, f_d: int = 0,
                    construction: str = FIVE_G, design_snr_db: float = 0.0,
                    max_node_size: int | None = None,
                    info_set=None) -> CodeSpec:
    """Build a CodeSpec.

    The k_info + crc_len most reliable positions become the information set
    (CRC bits count as information positions).  `info_set` overrides the
    reliability-based choice with an explicit 0-based index set.
    """
    if n_bits < 2 or n_bits & (n_bits - 1):
        raise ConstructionError(f"N={n_bits} is not a power of two >= 2")
    if crc_len and crc_len not in CRC_POLYS:
        raise ConstructionError(f"unsupported CRC length {crc_len}")
    n_nonfrozen = k_info + crc_len
    if not 0 <= n_nonfrozen <= n_bits:
        raise ConstructionError(
            f"K={k_info} plus CRC {crc_len} exceeds N={n_bits}")
    if dynamic_rule not in (ALL_STATIC, XOR_RULE):
        raise ConstructionError(f"unknown dynamic rule {dynamic_rule!r}")
    if max_node_size is None:
        max_node_size = n_bits

    if info_set is not None:
        info = tuple(sorted(int(i) for i in info_set))
        if len(info) != n_nonfrozen:
            raise ConstructionError("explicit info_set has the wrong size")
    else:
        if construction == FIVE_G:
            seq = load_reliability_sequence()
            if n_bits > len(seq):
                raise ConstructionError(
                    f"sequence covers N<={len(seq)}; use construction='ga'")
            order = seq[seq < n_bits]
        elif construction == POLAR_WEIGHT:
            order = _pw_reliability_order(n_bits)
        elif construction == GAUSSIAN_APPROX:
            rate = max(n_nonfrozen, 1) / n_bits
            order = _ga_reliability_order(n_bits, design_snr_db, rate)
        else:
            raise ConstructionError(f"unknown construction {construction!r}")
        info = tuple(sorted(int(i) for i in order[len(order) - n_nonfrozen:]))

    frozen = tuple(sorted(set(range(n_bits)) - set(info)))
    mask = np.ones(n_bits, dtype=np.int8)
    mask[list(info)] = 0
    suffix = np.zeros(n_bits + 1, dtype=np.int64)
    suffix[:n_bits] = mask[::-1].cumsum()[::-1]
    dyn = frozenset()
    if dynamic_rule == XOR_RULE:
        dyn = _dynamic_positions(mask, f_d, max_node_size)

    spec = CodeSpec(n_bits=n_bits, k_info=k_info, info_set=info,
                    frozen_set=frozen, frozen_suffix_count=suffix,
                    dynamic_rule=dynamic_rule, f_d=f_d, crc_len=crc_len,
                    dynamic_positions=dyn, construction=construction,
                    max_node_size=max_node_size)
    spec.validate()
    return spec


def dynamic_frozen_fill(spec: CodeSpec, u_prefix, t: int) -> int:
    """Value of the frozen bit at 0-based index t given the input prefix."""
    if t not in spec.dynamic_positions:
        return 0
    u = np.asarray(u_prefix, dtype=np.int8)
    return int(u[t - 2] ^ u[t - 3] ^ u[t - 5] ^ u[t - 6])


def fill_input(spec: CodeSpec, nonfrozen_bits: np.ndarray) -> np.ndarray:
    """Place non-frozen bits and fill frozen positions per the dynamic rule."""
    u = np.zeros(spec.n_bits, dtype=np.int8)
    u[list(spec.info_set)] = np.asarray(nonfrozen_bits, dtype=np.int8)
    for t in sorted(spec.dynamic_positions):
        u[t] = u[t - 2] ^ u[t - 3] ^ u[t - 5] ^ u[t - 6]
    return u


def encode(spec: CodeSpec, info_bits: np.ndarray):
    """Encode a K-bit payload; returns (input vector u, codeword).

    The CRC, when configured, is appended to the payload before placement in
    the information positions.
    """
    payload = np.asarray(info_bits, dtype=np.int8) % 2
    if payload.shape != (spec.k_info,):
        raise ConstructionError(
            f"payload must have length {spec.k_info}, got {payload.shape}")
    if spec.crc_len:
        payload = np.concatenate([payload, crc_compute(payload, spec.crc_len)])
    u = fill_input(spec, payload)
    return u, polar_transform(u)


def check_dynamic_constraints(spec: CodeSpec, u: np.ndarray) -> bool:
    """True when every frozen position of u carries its mandated value."""
    u = np.asarray(u, dtype=np.int8)
    for t in spec.frozen_set:
        want = dynamic_frozen_fill(spec, u[:t], t)
        if u[t] != want:
            return False
    return True
