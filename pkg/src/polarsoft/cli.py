"""Command line front end: BER sweeps, latency reports, oracle checks,
one-shot encode and single-frame decode."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .channel import (ChannelParams, LlrFrame, awgn_transmit, channel_llr,
                      modulate_bpsk)
from .code_construction import ALL_STATIC, XOR_RULE, build_code_spec, encode
from .latency_model import DECODER_KINDS
from .reference_oracle import exact_app_llrs, exact_codebook_prob
from .sim_harness import (ALL_DECODERS, CSV_HEADER, SimConfig, emit_results,
                          run_ber_sweep, run_latency_report)
from .soft_output import so_fscl_decode, so_scl_decode

_CRC_CHOICES = {"none": 0, "6": 6, "11": 11}


def _add_code_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, required=True, help="code length N")
    parser.add_argument("--k", type=int, required=True,
                        help="payload bits K (CRC added on top)")
    parser.add_argument("--crc", choices=sorted(_CRC_CHOICES), default="none")
    parser.add_argument("--fd", type=int, default=0,
                        help="dynamic frozen budget per node; 0 keeps all "
                             "frozen bits static")
    parser.add_argument("--construction", choices=["5g", "pw", "ga"],
                        default="5g")
    parser.add_argument("--design-snr", type=float, default=0.0,
                        help="design Eb/N0 in dB for the GA construction")
    parser.add_argument("--max-node-size", type=int, default=None)


def _add_decode_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--decoder", choices=ALL_DECODERS, default="so-scl")
    parser.add_argument("--list-size", type=int, default=2)
    parser.add_argument("--pm-mode", choices=["exact", "hw"], default="exact")
    parser.add_argument("--fg-mode", choices=["exact", "minsum"],
                        default="exact")
    parser.add_argument("--llr-clamp", type=float, default=40.0)


def _config_from_args(args) -> SimConfig:
    crc_len = _CRC_CHOICES[args.crc]
    f_d = getattr(args, "fd", 0)
    return SimConfig(
        n_bits=args.n, k_info=args.k, crc_len=crc_len,
        decoder=getattr(args, "decoder", "so-scl"),
        list_size=getattr(args, "list_size", 2),
        snr_start_db=getattr(args, "snr_start", 2.0),
        snr_stop_db=getattr(args, "snr_stop", getattr(args, "snr_start", 2.0)),
        snr_step_db=getattr(args, "snr_step", 0.5),
        max_frames=getattr(args, "frames", 10000),
        max_block_errors=getattr(args, "max_block_errors", 400),
        seed=getattr(args, "seed", 1),
        dynamic_rule=XOR_RULE if f_d > 0 else ALL_STATIC, f_d=f_d,
        construction=args.construction,
        max_node_size=args.max_node_size,
        fg_mode=getattr(args, "fg_mode", "exact"),
        pm_mode=getattr(args, "pm_mode", "exact"),
        llr_clamp=getattr(args, "llr_clamp", 40.0),
        workers=getattr(args, "workers", 1),
        all_zero_payload=getattr(args, "all_zero_payload", False),
        crc_in_rate=getattr(args, "rate_includes_crc", False),
        emit_timing=getattr(args, "timing", False))


def _cmd_ber_sweep(args) -> int:
    config = _config_from_args(args)
    records = run_ber_sweep(config)
    if args.output:
        emit_results(records, args.format, args.output)
    else:
        print(",".join(CSV_HEADER))
        for rec in records:
            print(",".join(str(v) for v in rec.row()))
    return 0


def _cmd_latency(args) -> int:
    config = _config_from_args(args)
    reports = run_latency_report(config, args.final_soft_step)
    if args.format == "jsonl":
        text = "\n".join(reports[d].to_json_lines() for d in DECODER_KINDS)
    else:
        parts = []
        for dec in DECODER_KINDS:
            rep = reports[dec]
            parts.append(rep.to_text() if args.breakdown else
                         f"{dec:8s} L={rep.list_size}  "
                         f"total={rep.total_steps} steps")
        text = "\n".join(parts)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _spec_from_args(args):
    crc_len = _CRC_CHOICES[args.crc]
    f_d = getattr(args, "fd", 0)
    return build_code_spec(
        args.n, args.k, crc_len,
        XOR_RULE if f_d > 0 else ALL_STATIC, f_d,
        args.construction, design_snr_db=args.design_snr,
        max_node_size=args.max_node_size)


def _cmd_oracle_check(args) -> int:
    spec = _spec_from_args(args)
    rng = np.random.default_rng(args.seed)
    list_size = 1 << spec.n_nonfrozen
    worst_app = 0.0
    worst_prob = 0.0
    for _ in range(args.frames):
        payload = rng.integers(0, 2, spec.k_info, dtype=np.int8)
        _, codeword = encode(spec, payload)
        params = ChannelParams.from_ebn0(args.snr_start, spec.rate)
        llr = channel_llr(awgn_transmit(modulate_bpsk(codeword), params, rng),
                          params)
        want_app = exact_app_llrs(spec, llr, clamp=args.llr_clamp)
        want_prob = exact_codebook_prob(spec, llr)
        for decode in (so_scl_decode, so_fscl_decode):
            got = decode(spec, llr, list_size, clamp=args.llr_clamp)
            worst_app = max(worst_app,
                            float(np.abs(got.app_llrs - want_app).max()))
            worst_prob = max(worst_prob,
                             abs(got.codebook_prob_log - want_prob)
                             / max(abs(want_prob), 1e-300))
    print(f"frames={args.frames} max|app error|={worst_app:.3e} "
          f"max codebook prob rel error={worst_prob:.3e}")
    ok = worst_app <= args.tolerance and worst_prob <= args.tolerance
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _parse_bits(text: str) -> np.ndarray:
    if not set(text) <= {"0", "1"}:
        raise SystemExit("payload must be a 0/1 string")
    return np.array([int(c) for c in text], dtype=np.int8)


def _cmd_encode(args) -> int:
    spec = _spec_from_args(args)
    if args.payload is not None:
        payload = _parse_bits(args.payload)
    else:
        rng = np.random.default_rng(args.seed)
        payload = rng.integers(0, 2, spec.k_info, dtype=np.int8)
    u, codeword = encode(spec, payload)
    print(json.dumps({
        "payload": "".join(map(str, payload.tolist())),
        "input_vector": "".join(map(str, u.tolist())),
        "codeword": "".join(map(str, codeword.tolist()))}))
    return 0


def _cmd_decode_frame(args) -> int:
    spec = _spec_from_args(args)
    config = _config_from_args(args)
    rng = np.random.default_rng(args.seed)
    if args.llr_file:
        values = np.loadtxt(args.llr_file, ndmin=1)
        if values.shape != (spec.n_bits,):
            raise SystemExit(f"expected {spec.n_bits} LLRs")
        llr = LlrFrame(values)
        payload = codeword = None
    else:
        payload = rng.integers(0, 2, spec.k_info, dtype=np.int8)
        _, codeword = encode(spec, payload)
        params = ChannelParams.from_ebn0(args.snr_start, spec.rate)
        llr = channel_llr(
            awgn_transmit(modulate_bpsk(codeword), params, rng), params)
    from .sim_harness import _decode_batch, _spec_and_tree
    _, tree = _spec_and_tree(config.n_bits, config.k_info, config.crc_len,
                             config.dynamic_rule, config.f_d,
                             config.construction, config.max_node_size)
    decided, decoded_payload = _decode_batch(config, spec, tree,
                                             llr.values[None, :])
    decided, decoded_payload = decided[0], decoded_payload[0]
    result = {
        "decoder": config.decoder,
        "decided_codeword": "".join(map(str, np.asarray(decided).tolist())),
        "decoded_payload": "".join(map(str, decoded_payload.tolist())),
    }
    if config.decoder in ("so-scl", "so-fscl", "pyndiah"):
        decode = {"so-scl": so_scl_decode, "so-fscl": so_fscl_decode}.get(
            config.decoder)
        if decode is not None:
            out = decode(spec, llr, config.list_size, clamp=config.llr_clamp)
            result["app_llrs"] = [round(float(v), 6) for v in out.app_llrs]
            result["codebook_prob_log"] = float(out.codebook_prob_log)
    if codeword is not None:
        result["tx_codeword"] = "".join(map(str, codeword.tolist()))
        result["bit_errors"] = int(np.sum(decided != codeword))
    print(json.dumps(result))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarsoft",
        description="Polar coding simulations with soft-output fast list "
                    "decoding")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ber-sweep", help="Monte Carlo BER/BLER sweep")
    _add_code_args(p)
    _add_decode_args(p)
    p.add_argument("--snr-start", type=float, default=2.0)
    p.add_argument("--snr-stop", type=float, default=3.0)
    p.add_argument("--snr-step", type=float, default=0.5)
    p.add_argument("--frames", type=int, default=10000)
    p.add_argument("--max-block-errors", type=int, default=400)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--all-zero-payload", action="store_true")
    p.add_argument("--rate-includes-crc", action="store_true",
                   help="count CRC bits in the rate used for the Eb/N0 to "
                        "noise-variance mapping")
    p.add_argument("--timing", action="store_true",
                   help="emit measured wall time (breaks bit-exact "
                        "reproducibility of the output file)")
    p.add_argument("--output", default=None)
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    p.set_defaults(func=_cmd_ber_sweep)

    p = sub.add_parser("latency", help="deterministic time-step report")
    _add_code_args(p)
    p.add_argument("--list-size", type=int, default=4)
    p.add_argument("--breakdown", action="store_true",
                   help="print the per-node table")
    p.add_argument("--final-soft-step", action="store_true",
                   help="charge the soft decoders one extra step for the "
                        "final per-bit LLR combination")
    p.add_argument("--output", default=None)
    p.add_argument("--format", choices=["text", "jsonl"], default="text")
    p.set_defaults(func=_cmd_latency)

    p = sub.add_parser("oracle-check",
                       help="compare soft decoders against the exact oracle")
    _add_code_args(p)
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--snr-start", type=float, default=2.0)
    p.add_argument("--llr-clamp", type=float, default=40.0)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.set_defaults(func=_cmd_oracle_check)

    p = sub.add_parser("encode", help="encode one payload")
    _add_code_args(p)
    p.add_argument("--payload", default=None, help="payload as a 0/1 string")
    p.add_argument("--seed", type=int, default=1,
                   help="seed for a random payload when none is given")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode-frame", help="decode one frame")
    _add_code_args(p)
    _add_decode_args(p)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--snr-start", type=float, default=2.0,
                   help="Eb/N0 for the generated frame")
    p.add_argument("--llr-file", default=None,
                   help="read channel LLRs (one per line) instead of "
                        "simulating a frame")
    p.set_defaults(func=_cmd_decode_frame)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
