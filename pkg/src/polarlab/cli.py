"""Command-line front end.

Usage:
    polarlab construct --N 512 --K 256 --output-dir codes/
    polarlab encode --config configs/pc512_r12.json --payload 0110...
    polarlab decode --config configs/pc512_r12.json --ebn0 2.0 --trace
    polarlab simulate --config configs/pc512_scl2.json --output results/pc512.csv
    polarlab compare --polar configs/pc512_r12.json --ldpc configs/wimax_r12_T20.json
    polarlab steps --N 512 --K 256 --L 8 --algo fast_sscl --pe 32
    polarlab sweep-crc --config configs/pc512_pscl22.json --lengths 0,8,16 --ebn0 2.0 --P 2

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 runtime failure.
"""

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from polarlab import __version__
from polarlab.artifacts import ResultWriter
from polarlab.capacity import get_cpu_count, get_host_info
from polarlab.channel_sim import (
    ChannelConfig,
    PolarFrameCodec,
    SimResult,
    build_list_decoder,
    channel_llr,
    crc_sweep,
    frame_rng,
    results_to_csv,
    run_sweep,
    transmit,
)
from polarlab.config import ExperimentConfig, load_config, seed_from_environment
from polarlab.events import EventFormatter, format_trace_event
from polarlab.exceptions import ConfigurationError, PolarLabError
from polarlab.fast_and_partitioned import step_report
from polarlab.polar_code import CONSTRUCTION_METHODS, PolarCode, as_bits, encode, write_reliability_file

logger = logging.getLogger(__name__)

STEP_ALGORITHMS = ("scl", "sscl", "fast_sscl")


class UsageErrorParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit status 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"error: {message}\n")


def _bit_string(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def _int_list(text: str) -> list[int]:
    try:
        return [int(token) for token in text.replace(" ", "").split(",") if token]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(token) for token in text.replace(" ", "").split(",") if token]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-v", "--verbose",
        dest="verbosity",
        action="count",
        default=0,
        help="Increase verbosity (-v progress per block, -vv debug logging)",
    )
    common.add_argument(
        "--workers",
        type=int,
        default=None,
        help="Worker processes (default: available CPUs)",
    )
    common.add_argument(
        "--quant",
        choices=("float", "fixed"),
        default=None,
        help="Arithmetic model, overriding the configuration",
    )
    return common


def _load_experiment(path: str, args: argparse.Namespace, **overrides: Any) -> ExperimentConfig:
    """Load a configuration and apply environment and command-line overrides."""
    config = load_config(path)
    return config.with_overrides(seed=seed_from_environment(), quant=args.quant, **overrides)


def _code_from_options(args: argparse.Namespace, algorithm: str = "scl") -> ExperimentConfig:
    """Configuration for commands that describe a polar code with flags."""
    if args.config:
        config = _load_experiment(args.config, args)
        if config.family != "polar":
            raise ConfigurationError(f"{args.config}: {args.command} needs a polar code configuration")
        return config
    if args.N is None or args.K is None:
        raise ConfigurationError("code: give --config or both --N and --K")
    raw: dict[str, Any] = {
        "N": args.N,
        "K": args.K,
        "algorithm": algorithm,
        "construction": args.construction,
        "design_ebn0_db": args.design_ebn0,
        "crc": args.crc,
    }
    if args.reliability_file:
        raw["reliability_file"] = args.reliability_file
    return ExperimentConfig.from_mapping(raw)


def _add_code_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Experiment configuration (JSON or YAML)")
    parser.add_argument("--N", type=int, help="Code length")
    parser.add_argument("--K", type=int, help="Information bits, CRC included")
    parser.add_argument(
        "--construction",
        choices=CONSTRUCTION_METHODS,
        default="gaussian_approximation",
        help="Reliability construction (default: gaussian_approximation)",
    )
    parser.add_argument(
        "--design-ebn0",
        dest="design_ebn0",
        type=float,
        default=2.0,
        help="Design Eb/N0 in dB (default: 2.0)",
    )
    parser.add_argument("--crc", type=int, default=8, help="CRC width, 0 for none (default: 8)")
    parser.add_argument(
        "--reliability-file",
        dest="reliability_file",
        help="Reliability sequence for from_file construction",
    )


def _sidecar(configs: list[ExperimentConfig], results: list[SimResult], workers: int) -> dict[str, Any]:
    return {
        "polarlab_version": __version__,
        "configs": [json.loads(c.canonical_json) for c in configs],
        "fingerprints": [c.fingerprint for c in configs],
        "workers": workers,
        "host": get_host_info(),
        "series": [
            {
                "decoder": result.decoder,
                "code": result.code,
                "points": [
                    {
                        "ebn0_db": p.ebn0_db,
                        "frames": p.frames,
                        "frame_errors": p.frame_errors,
                        "fer_interval": list(p.fer_interval()),
                        "ber_interval": list(p.ber_interval()),
                        "wall_time": p.wall_time,
                    }
                    for p in result.points
                ],
            }
            for result in results
        ],
    }


def _emit(text: str, output: str | None, metadata: dict[str, Any] | None = None) -> None:
    """Write a CSV artifact to ``output`` (with its sidecar) or to stdout."""
    if output is None:
        sys.stdout.write(text)
        return
    writer = ResultWriter(output)
    writer.setup()
    writer.write_table(text)
    if metadata is not None:
        writer.write_sidecar(metadata)
    print(f"wrote {writer.output_path}", file=sys.stderr)


def _simulate(config: ExperimentConfig, args: argparse.Namespace, on_event: Callable) -> SimResult:
    logger.info("simulating %s (fingerprint %s)", config.decoder.label(), config.fingerprint)
    return run_sweep(
        config.build_code(),
        config.decoder,
        config.ebn0_list,
        config.stop,
        seed=config.seed,
        quantizer=config.quantizer,
        workers=args.workers,
        on_event=on_event,
        fingerprint=config.fingerprint,
    )


# --- construct -------------------------------------------------------------


def create_construct_parser(subparsers, common) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        "construct",
        parents=[common],
        help="Build a code and write its reliability and frozen-set files",
    )
    _add_code_options(parser)
    parser.add_argument(
        "--output-dir",
        dest="output_dir",
        default=".",
        help="Directory for reliability.txt, frozen.txt and code.json (default: .)",
    )
    return parser


def handle_construct(args: argparse.Namespace) -> int:
    config = _code_from_options(args)
    code = config.build_code()
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_reliability_file(out / "reliability.txt", code.reliability_order)
    (out / "frozen.txt").write_text("".join(f"{int(i)}\n" for i in code.frozen_positions))
    descriptor = {
        "N": code.N,
        "K": code.K,
        "label": code.label,
        "crc": code.crc.to_dict() if code.crc else None,
        "construction": config.data["code"]["construction"],
        "design_ebn0_db": config.data["code"]["design_ebn0_db"],
        "info_positions": [int(i) for i in code.info_positions],
    }
    (out / "code.json").write_text(json.dumps(descriptor, indent=2) + "\n")
    print(f"{code.label}: wrote reliability.txt, frozen.txt, code.json to {out}")
    return 0


# --- encode / decode -------------------------------------------------------


def create_encode_parser(subparsers, common) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("encode", parents=[common], help="Encode one payload")
    parser.add_argument("--config", required=True, help="Polar code configuration")
    parser.add_argument("--payload", help="Payload bit string (default: random frame payload)")
    parser.add_argument("--frame", type=int, default=0, help="Frame index for a random payload")
    return parser


def handle_encode(args: argparse.Namespace) -> int:
    config = _load_experiment(args.config, args)
    if config.family != "polar":
        raise ConfigurationError(f"{args.config}: encode needs a polar code configuration")
    code = config.build_code()
    codec = PolarFrameCodec(code, config.decoder, config.quantizer)
    if args.payload is None:
        payload, codeword = codec.draw(frame_rng(config.seed, args.frame))
    else:
        payload = as_bits(args.payload, codec.payload_length)
        codeword = encode(code, codec.layout.place(payload))
    summary = {
        "code": code.label,
        "payload": _bit_string(payload),
        "u": _bit_string(codec.layout.place(payload)),
        "codeword": _bit_string(codeword),
    }
    print(yaml.safe_dump(summary, sort_keys=False), end="")
    return 0


def create_decode_parser(subparsers, common) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("decode", parents=[common], help="Decode one seeded frame")
    parser.add_argument("--config", required=True, help="Polar code configuration")
    parser.add_argument("--ebn0", type=float, help="Eb/N0 in dB (default: first configured point)")
    parser.add_argument("--frame", type=int, default=0, help="Frame index (default: 0)")
    parser.add_argument("--noiseless", action="store_true", help="Send the codeword without noise")
    parser.add_argument("--trace", action="store_true", help="Print one line per decoding step")
    return parser


def handle_decode(args: argparse.Namespace) -> int:
    config = _load_experiment(args.config, args)
    if config.family != "polar":
        raise ConfigurationError(f"{args.config}: decode needs a polar code configuration")
    code: PolarCode = config.build_code()
    ebn0_db = args.ebn0 if args.ebn0 is not None else config.ebn0_list[0]
    channel = ChannelConfig(ebn0_db, code.rate, config.seed)

    def trace(event: dict[str, Any]) -> None:
        print(format_trace_event(event))

    decoder = build_list_decoder(code, config.decoder, config.quantizer, trace if args.trace else None)
    codec = PolarFrameCodec(code, config.decoder, config.quantizer)
    rng = frame_rng(config.seed, args.frame)
    payload, codeword = codec.draw(rng)
    if args.noiseless:
        received = 1.0 - 2.0 * codeword.astype(np.float64)
    else:
        received = transmit(codeword, channel.sigma, rng)
    result = decoder.decode(channel_llr(received, channel.sigma))

    summary = {
        "code": code.label,
        "decoder": config.decoder.label(code.crc_width),
        "ebn0_db": ebn0_db,
        "seed": config.seed,
        "frame": args.frame,
        "payload": _bit_string(payload),
        "decoded": _bit_string(result.payload),
        "bit_errors": int(np.count_nonzero(result.payload != payload)),
        "pm": float(result.pm),
        "crc_ok": bool(result.crc_ok),
    }
    print(yaml.safe_dump(summary, sort_keys=False), end="")
    return 0


# --- simulate / compare ----------------------------------------------------


def create_simulate_parser(subparsers, common) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("simulate", parents=[common], help="Run an FER/BER sweep")
    parser.add_argument("--config", required=True, help="Experiment configuration")
    parser.add_argument("--output", help="CSV path (default: stdout)")
    parser.add_argument("--ebn0", type=_float_list, help="Comma-separated Eb/N0 points in dB")
    parser.add_argument("--max-frames", dest="max_frames", type=int, help="Frame cap per point")
    parser.add_argument("--min-errors", dest="min_errors", type=int, help="Frame errors per point")
    return parser


def handle_simulate(args: argparse.Namespace) -> int:
    config = _load_experiment(
        args.config, args, ebn0_list=args.ebn0, max_frames=args.max_frames, min_errors=args.min_errors
    )
    result = _simulate(config, args, EventFormatter(sys.stderr, args.verbosity, sys.stderr.isatty()))
    _emit(result.to_csv(), args.output, _sidecar([config], [result], args.workers))
    return 0


def create_compare_parser(subparsers, common) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        "compare",
        parents=[common],
        help="Run a polar and an LDPC sweep into one CSV with a series column",
    )
    parser.add_argument("--polar", required=True, help="Polar experiment configuration")
    parser.add_argument("--ldpc", required=True, help="LDPC experiment configuration")
    parser.add_argument("--output", help="CSV path (default: stdout)")
    parser.add_argument("--max-frames", dest="max_frames", type=int, help="Frame cap per point")
    parser.add_argument("--min-errors", dest="min_errors", type=int, help="Frame errors per point")
    return parser


def handle_compare(args: argparse.Namespace) -> int:
    overrides = {"max_frames": args.max_frames, "min_errors": args.min_errors}
    polar = _load_experiment(args.polar, args, **overrides)
    ldpc = _load_experiment(args.ldpc, args, **overrides)
    if polar.family != "polar":
        raise ConfigurationError(f"{args.polar}: --polar needs a polar code configuration")
    if ldpc.family != "ldpc":
        raise ConfigurationError(f"{args.ldpc}: --ldpc needs an LDPC configuration")
    on_event = EventFormatter(sys.stderr, args.verbosity, sys.stderr.isatty())
    results = [_simulate(config, args, on_event) for config in (polar, ldpc)]
    _emit(results_to_csv(results, series=True), args.output, _sidecar([polar, ldpc], results, args.workers))
    return 0


# --- steps -----------------------------------------------------------------


def create_steps_parser(subparsers, common) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("steps", parents=[common], help="Count decoding time steps")
    _add_code_options(parser)
    parser.add_argument("--L", type=int, default=8, help="List size (default: 8)")
    parser.add_argument(
        "--algo",
        choices=STEP_ALGORITHMS,
        default="fast_sscl",
        help="Algorithm whose schedule --schedule-csv writes (default: fast_sscl)",
    )
    parser.add_argument("--pe", type=int, default=32, help="Processing elements (default: 32)")
    parser.add_argument(
        "--schedule-csv",
        dest="schedule_csv",
        help="Write the node schedule of --algo to this CSV",
    )
    return parser


def handle_steps(args: argparse.Namespace) -> int:
    if args.L < 1:
        raise ConfigurationError(f"L: must be >= 1, got {args.L}")
    config = _code_from_options(args)
    code = config.build_code()
    report, schedules = step_report(code, args.L, args.pe)

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["algorithm", "N", "K", "L", "pe", "steps", "reduction"])
    for algorithm in STEP_ALGORITHMS:
        writer.writerow([
            algorithm, report.N, report.K, report.L, report.pe,
            report.totals[algorithm], f"{report.reduction(algorithm):.4f}",
        ])
    sys.stdout.write(buffer.getvalue())

    if args.schedule_csv:
        _emit(schedules[args.algo].to_csv(), args.schedule_csv)
    return 0


# --- sweep-crc -------------------------------------------------------------


def create_sweep_crc_parser(subparsers, common) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        "sweep-crc",
        parents=[common],
        help="Rank per-partition CRC allocations of PSCL at one Eb/N0",
    )
    parser.add_argument("--config", required=True, help="Polar code configuration")
    parser.add_argument("--lengths", type=_int_list, required=True, help="Candidate CRC widths, e.g. 0,8,16")
    parser.add_argument("--ebn0", type=float, required=True, help="Target Eb/N0 in dB")
    parser.add_argument("--P", type=int, help="Partitions (default: configured P, else 2)")
    parser.add_argument("--L", type=int, help="List size (default: configured L)")
    parser.add_argument("--output", help="CSV path (default: stdout)")
    parser.add_argument("--max-frames", dest="max_frames", type=int, help="Frame cap per allocation")
    parser.add_argument("--min-errors", dest="min_errors", type=int, help="Frame errors per allocation")
    return parser


def handle_sweep_crc(args: argparse.Namespace) -> int:
    config = _load_experiment(args.config, args, max_frames=args.max_frames, min_errors=args.min_errors)
    if config.family != "polar":
        raise ConfigurationError(f"{args.config}: sweep-crc needs a polar code configuration")
    P = args.P if args.P is not None else config.data["decoder"].get("P", 2)
    L = args.L if args.L is not None else config.decoder.L
    if L < 1:
        raise ConfigurationError(f"L: must be >= 1, got {L}")
    code = config.build_code()
    ranking = crc_sweep(
        code, P, L, args.lengths, args.ebn0, config.stop,
        seed=config.seed,
        quantizer=config.quantizer,
        workers=args.workers,
        on_event=EventFormatter(sys.stderr, args.verbosity, sys.stderr.isatty()),
    )

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["rank", "partition_crcs", "total_crc_bits", "frames", "frame_errors", "fer", "ebn0_db", "seed"])
    for rank, allocation in enumerate(ranking, start=1):
        point = allocation.point
        writer.writerow([
            rank,
            " ".join(str(w) for w in allocation.widths),
            allocation.total_bits,
            point.frames,
            point.frame_errors,
            f"{point.fer:.6e}",
            f"{point.ebn0_db:g}",
            point.seed,
        ])
    _emit(buffer.getvalue(), args.output)
    return 0


# --- entry -----------------------------------------------------------------

HANDLERS: dict[str, Callable[[argparse.Namespace], int]] = {
    "construct": handle_construct,
    "encode": handle_encode,
    "decode": handle_decode,
    "simulate": handle_simulate,
    "compare": handle_compare,
    "steps": handle_steps,
    "sweep-crc": handle_sweep_crc,
}


def create_parser() -> argparse.ArgumentParser:
    parser = UsageErrorParser(
        prog="polarlab",
        description="Polar list decoders, an LDPC baseline and a seeded FER/BER harness",
    )
    parser.add_argument("--version", action="version", version=f"polarlab {__version__}")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")
    common = _common_options()
    create_construct_parser(subparsers, common)
    create_encode_parser(subparsers, common)
    create_decode_parser(subparsers, common)
    create_simulate_parser(subparsers, common)
    create_compare_parser(subparsers, common)
    create_steps_parser(subparsers, common)
    create_sweep_crc_parser(subparsers, common)
    return parser


def run_command(argv: list[str] | None = None) -> int:
    """Parse ``argv``, run one subcommand and return its exit code."""
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1

    if args.command is None:
        parser.print_help()
        return 1
    _configure_logging(args.verbosity)
    if args.workers is None:
        args.workers = get_cpu_count()
    elif args.workers < 1:
        print(f"error: --workers must be >= 1, got {args.workers}", file=sys.stderr)
        return 1

    try:
        return HANDLERS[args.command](args)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (PolarLabError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
