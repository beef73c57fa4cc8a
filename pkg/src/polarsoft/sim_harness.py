"""Monte Carlo BER/BLER sweeps, latency reports and result emission.

Every frame draws its noise and payload from a counter-derived stream
seeded by (master seed, SNR point index, frame index), and early stopping
cuts at a frame boundary found by scanning results in frame order, so a
sweep is bit-reproducible for any worker count.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams
from .code_construction import (ALL_STATIC, CRC_POLYS, FIVE_G, CodeSpec,
                                build_code_spec, polar_transform)
from .fscl_core import fscl_decode_batch
from .latency_model import DECODER_KINDS, total_latency
from .node_tree import decompose
from .scl_core import EXACT, scl_decode_batch
from .soft_output import (_pick_best_batch, pyndiah_decode_batch,
                          soft_decode_batch)

HARD_DECODERS = ("sc", "scl", "fscl")
SOFT_DECODERS = ("so-scl", "so-fscl", "pyndiah")
ALL_DECODERS = HARD_DECODERS + SOFT_DECODERS

CSV_HEADER = ("snr_db", "decoder", "frames", "bit_errors", "ber",
              "block_errors", "bler", "ci_low", "ci_high", "seconds")

_CHUNK_FRAMES = 384


@dataclass(frozen=True)
class SimConfig:
    """Full description of one sweep; (config, seed) determines every
    emitted number."""

    n_bits: int
    k_info: int
    crc_len: int = 0
    decoder: str = "so-scl"
    list_size: int = 2
    snr_start_db: float = 2.0
    snr_stop_db: float = 3.0
    snr_step_db: float = 0.5
    max_frames: int = 10000
    max_block_errors: int = 400
    seed: int = 1
    dynamic_rule: str = ALL_STATIC
    f_d: int = 0
    construction: str = FIVE_G
    max_node_size: int | None = None
    fg_mode: str = EXACT
    pm_mode: str = EXACT
    llr_clamp: float = 40.0
    workers: int = 1
    all_zero_payload: bool = False
    crc_in_rate: bool = False
    emit_timing: bool = False

    def validate(self) -> None:
        if self.decoder not in ALL_DECODERS:
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.max_frames < 1:
            raise ValueError("max_frames must be >= 1")
        if self.snr_step_db <= 0:
            raise ValueError("snr_step_db must be positive")
        if self.snr_stop_db < self.snr_start_db:
            raise ValueError("empty SNR grid")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def snr_grid(self):
        count = int(math.floor(
            (self.snr_stop_db - self.snr_start_db) / self.snr_step_db
            + 1e-9)) + 1
        return [round(self.snr_start_db + i * self.snr_step_db, 10)
                for i in range(count)]


@dataclass
class TrialRecord:
    """Counts and rates for one (SNR point, decoder) cell.

    `bit_errors` counts code-bit mismatches of the emitted hard decision
    (APP LLR signs for the soft decoders, the best codeword otherwise);
    `info_bit_errors` counts payload mismatches.  The Wilson interval is on
    the bit error rate.
    """

    snr_db: float
    decoder: str
    frames: int
    bit_errors: int
    ber: float
    block_errors: int
    bler: float
    ci_low: float
    ci_high: float
    seconds: float
    info_bit_errors: int = 0

    def row(self):
        return [self.snr_db, self.decoder, self.frames, self.bit_errors,
                self.ber, self.block_errors, self.bler, self.ci_low,
                self.ci_high, self.seconds]


def wilson_interval(errors: int, n: int, z: float = 1.959963984540054):
    """95% Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p_hat = errors / n
    denom = 1.0 + z * z / n
    center = (p_hat + z * z / (2 * n)) / denom
    half = z * math.sqrt(p_hat * (1 - p_hat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@functools.lru_cache(maxsize=32)
def _spec_and_tree(n_bits, k_info, crc_len, dynamic_rule, f_d, construction,
                   max_node_size):
    spec = build_code_spec(n_bits, k_info, crc_len, dynamic_rule, f_d,
                           construction, max_node_size=max_node_size)
    return spec, decompose(spec, spec.max_node_size)


def _encode_batch(spec: CodeSpec, payloads: np.ndarray) -> np.ndarray:
    """Codewords of a (batch, K) payload block."""
    nonfrozen = payloads
    if spec.crc_len:
        poly = CRC_POLYS[spec.crc_len]
        reg = np.concatenate(
            [payloads, np.zeros((payloads.shape[0], spec.crc_len),
                                dtype=np.int8)], axis=1)
        for i in range(payloads.shape[1]):
            reg[:, i:i + spec.crc_len + 1] ^= poly * reg[:, i:i + 1]
        nonfrozen = np.concatenate([payloads, reg[:, -spec.crc_len:]],
                                   axis=1)
    u = np.zeros((payloads.shape[0], spec.n_bits), dtype=np.int8)
    u[:, list(spec.info_set)] = nonfrozen
    for t in sorted(spec.dynamic_positions):
        u[:, t] = u[:, t - 2] ^ u[:, t - 3] ^ u[:, t - 5] ^ u[:, t - 6]
    return polar_transform(u)


def _decode_batch(config: SimConfig, spec: CodeSpec, tree,
                  llr_frames: np.ndarray):
    """Returns (decided codeword bits, decoded payload bits), batched."""
    kind = config.decoder
    if kind in HARD_DECODERS:
        lst = 1 if kind == "sc" else config.list_size
        if kind == "fscl":
            lists = fscl_decode_batch(spec, llr_frames, lst, tree,
                                      fg_mode=config.fg_mode,
                                      pm_mode=config.pm_mode)
        else:
            lists = scl_decode_batch(spec, llr_frames, lst,
                                     fg_mode=config.fg_mode,
                                     pm_mode=config.pm_mode)
        best_cw, best_nf, _ = _pick_best_batch(spec, lists)
        return best_cw, best_nf[:, :spec.k_info]
    if kind == "pyndiah":
        out = pyndiah_decode_batch(spec, llr_frames, config.list_size,
                                   clamp_beta=config.llr_clamp,
                                   fg_mode=config.fg_mode,
                                   pm_mode=config.pm_mode)
    else:
        engine = "fscl" if kind == "so-fscl" else "scl"
        out = soft_decode_batch(spec, llr_frames, config.list_size, engine,
                                tree, clamp=config.llr_clamp,
                                fg_mode=config.fg_mode,
                                pm_mode=config.pm_mode)
    return out.hard_decisions, out.best_nonfrozen[:, :spec.k_info]


def _simulate_chunk(config: SimConfig, point_index: int, snr_db: float,
                    start: int, count: int):
    """Per-frame (code-bit errors, payload-bit errors, block flag) arrays.

    Frames are decoded as one batch; the per-frame streams make the result
    independent of the chunking.
    """
    spec, tree = _spec_and_tree(config.n_bits, config.k_info, config.crc_len,
                                config.dynamic_rule, config.f_d,
                                config.construction, config.max_node_size)
    rate = ((spec.k_info + spec.crc_len) if config.crc_in_rate
            else spec.k_info) / spec.n_bits
    params = ChannelParams.from_ebn0(snr_db, rate)
    payloads = np.zeros((count, spec.k_info), dtype=np.int8)
    noise = np.empty((count, spec.n_bits))
    sigma = math.sqrt(params.noise_variance)
    for k in range(count):
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=config.seed, spawn_key=(point_index, start + k)))
        if not config.all_zero_payload:
            payloads[k] = rng.integers(0, 2, spec.k_info, dtype=np.int8)
        noise[k] = rng.normal(0.0, sigma, size=spec.n_bits)
    codewords = _encode_batch(spec, payloads)
    received = (1.0 - 2.0 * codewords) + noise
    llr_frames = 2.0 * received / params.noise_variance
    decided, decoded_payloads = _decode_batch(config, spec, tree, llr_frames)
    bit_errs = (decided != codewords).sum(axis=1).astype(np.int64)
    info_errs = (decoded_payloads != payloads).sum(axis=1).astype(np.int64)
    return bit_errs, info_errs, bit_errs > 0


def _run_point(config: SimConfig, point_index: int, snr_db: float,
               pool) -> TrialRecord:
    started = time.perf_counter()
    bit_parts, info_parts, block_parts = [], [], []
    next_frame = 0
    done = 0
    cum_blocks = 0
    stop = False
    while not stop and next_frame < config.max_frames:
        wave = []
        for _ in range(max(1, config.workers)):
            if next_frame >= config.max_frames:
                break
            count = min(_CHUNK_FRAMES, config.max_frames - next_frame)
            wave.append((next_frame, count))
            next_frame += count
        if pool is None:
            results = [_simulate_chunk(config, point_index, snr_db, s, c)
                       for s, c in wave]
        else:
            futures = [pool.submit(_simulate_chunk, config, point_index,
                                   snr_db, s, c) for s, c in wave]
            results = [f.result() for f in futures]
        for bit_e, info_e, blk in results:
            bit_parts.append(bit_e)
            info_parts.append(info_e)
            block_parts.append(blk)
            done += len(blk)
            cum_blocks += int(blk.sum())
            if cum_blocks >= config.max_block_errors:
                stop = True
    bit_all = np.concatenate(bit_parts) if bit_parts else np.zeros(0, int)
    info_all = np.concatenate(info_parts) if info_parts else np.zeros(0, int)
    blk_all = np.concatenate(block_parts) if block_parts else np.zeros(0, bool)
    cut = len(blk_all)
    if blk_all.sum() >= config.max_block_errors:
        cut = int(np.searchsorted(np.cumsum(blk_all),
                                  config.max_block_errors)) + 1
    frames = min(cut, config.max_frames)
    bit_errors = int(bit_all[:frames].sum())
    info_errors = int(info_all[:frames].sum())
    block_errors = int(blk_all[:frames].sum())
    bits = frames * config.n_bits
    lo, hi = wilson_interval(bit_errors, bits)
    seconds = time.perf_counter() - started if config.emit_timing else 0.0
    return TrialRecord(snr_db=snr_db, decoder=config.decoder, frames=frames,
                       bit_errors=bit_errors,
                       ber=bit_errors / bits if bits else 0.0,
                       block_errors=block_errors,
                       bler=block_errors / frames if frames else 0.0,
                       ci_low=lo, ci_high=hi, seconds=seconds,
                       info_bit_errors=info_errors)


def run_ber_sweep(config: SimConfig):
    """Simulate every SNR grid point; stops each point at max_frames or
    max_block_errors, whichever comes first."""
    config.validate()
    records = []
    pool = None
    try:
        if config.workers > 1:
            pool = ProcessPoolExecutor(max_workers=config.workers)
        for idx, snr in enumerate(config.snr_grid()):
            records.append(_run_point(config, idx, snr, pool))
    finally:
        if pool is not None:
            pool.shutdown()
    return records


def run_latency_report(config: SimConfig, include_final_soft_step=False):
    """Per-decoder time-step reports for the configured code."""
    spec, tree = _spec_and_tree(config.n_bits, config.k_info, config.crc_len,
                                config.dynamic_rule, config.f_d,
                                config.construction, config.max_node_size)
    return {dec: total_latency(tree, config.list_size, dec,
                               include_final_soft_step)
            for dec in DECODER_KINDS}


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_results(records, fmt: str, path: str) -> None:
    """Write records as CSV (fixed 10-column header) or JSON lines."""
    if not records:
        raise ValueError("no records to emit")
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(CSV_HEADER)
                for rec in records:
                    writer.writerow([_format_cell(v) for v in rec.row()])
        elif fmt == "jsonl":
            with open(path, "w") as fh:
                for rec in records:
                    fh.write(json.dumps(dict(zip(CSV_HEADER, rec.row())))
                             + "\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def parse_results(fmt: str, path: str):
    """Read back records emitted by emit_results."""
    records = []
    if fmt == "csv":
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                records.append(_record_from_mapping(row))
    elif fmt == "jsonl":
        with open(path) as fh:
            for line in fh:
                records.append(_record_from_mapping(json.loads(line)))
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return records


def _record_from_mapping(row) -> TrialRecord:
    return TrialRecord(snr_db=float(row["snr_db"]),
                       decoder=str(row["decoder"]),
                       frames=int(row["frames"]),
                       bit_errors=int(row["bit_errors"]),
                       ber=float(row["ber"]),
                       block_errors=int(row["block_errors"]),
                       bler=float(row["bler"]),
                       ci_low=float(row["ci_low"]),
                       ci_high=float(row["ci_high"]),
                       seconds=float(row["seconds"]))
