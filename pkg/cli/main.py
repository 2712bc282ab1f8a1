"""
Command-Line Entry Point
Argument parsing, verb dispatch and the one-line machine-readable error report
"""

import argparse
import logging
import sys
from typing import List, Optional

from core.exceptions import (
    CheckpointError, ConfigurationError, DataError, NumericError, RaveError, ShapeError
)
from latent.sweep import DEFAULT_FIDELITIES
from runtime.bench import DEFAULT_TRIALS, MODES
from . import commands
from .wavio import FORMATS

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(error, (DataError, CheckpointError, ShapeError)):
        return EXIT_DATA
    if isinstance(error, NumericError):
        return EXIT_NUMERIC
    return EXIT_OTHER


def error_line(error: BaseException) -> str:
    code = getattr(error, "error_code", "internal")
    message = " ".join(str(error).split())
    return f"error={type(error).__name__} code={code} message={message}"


def _fidelity_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rave", description="Realtime audio variational autoencoder")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    verbs = parser.add_subparsers(dest="command", required=True)

    train = verbs.add_parser("train", help="run two-stage training from a config file")
    train.add_argument("config")
    train.add_argument("--resume", default=None, help="checkpoint to continue from")
    train.add_argument("--seed", type=int, default=None)

    encode = verbs.add_parser("encode", help="audio to a latent file")
    encode.add_argument("checkpoint")
    encode.add_argument("input")
    encode.add_argument("output")
    encode.add_argument("--fidelity", type=float, default=None)

    decode = verbs.add_parser("decode", help="latent file to audio")
    decode.add_argument("checkpoint")
    decode.add_argument("input")
    decode.add_argument("output")
    decode.add_argument("--format", choices=FORMATS, default="pcm16")
    decode.add_argument("--seed", type=int, default=0)

    analyze = verbs.add_parser("analyze", help="fit the latent basis and report fidelity ranks")
    analyze.add_argument("checkpoint")
    analyze.add_argument("dataset")
    analyze.add_argument("--fidelities", type=_fidelity_list, default=list(DEFAULT_FIDELITIES))
    analyze.add_argument("--out", default=None, help="fidelity table CSV")
    analyze.add_argument("--max-samples", type=int, default=4096)
    analyze.add_argument("--seed", type=int, default=0)
    analyze.add_argument("--no-sweep", action="store_true", help="skip reconstruction distances")

    transfer = verbs.add_parser("transfer", help="resynthesize audio through a model")
    transfer.add_argument("checkpoint")
    transfer.add_argument("input")
    transfer.add_argument("output")
    transfer.add_argument("--reference", default=None, help="in-domain clip for the KL comparison")
    transfer.add_argument("--format", choices=FORMATS, default="pcm16")

    bench = verbs.add_parser("bench", help="decoder throughput")
    bench.add_argument("checkpoint")
    bench.add_argument("--mode", choices=MODES + ("both",), default="full")
    bench.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    bench.add_argument("--out", default=None, help="per-trial CSV")
    bench.add_argument("--seed", type=int, default=0)

    corpus = verbs.add_parser("synth-corpus", help="write the synthetic training corpus")
    corpus.add_argument("spec", nargs="?", default=None, help="config file with corpus.* keys")
    corpus.add_argument("output")
    corpus.add_argument("--seed", type=int, default=None)
    return parser


def dispatch(args: argparse.Namespace) -> None:
    if args.command == "train":
        commands.cmd_train(args.config, resume=args.resume, seed=args.seed)
    elif args.command == "encode":
        commands.cmd_encode(args.checkpoint, args.input, args.output, fidelity=args.fidelity)
    elif args.command == "decode":
        commands.cmd_decode(args.checkpoint, args.input, args.output, wav_format=args.format, seed=args.seed)
    elif args.command == "analyze":
        commands.cmd_analyze(
            args.checkpoint, args.dataset, args.fidelities, out_csv=args.out,
            max_samples=args.max_samples, seed=args.seed, sweep=not args.no_sweep
        )
    elif args.command == "transfer":
        commands.cmd_transfer(args.checkpoint, args.input, args.output, reference=args.reference, wav_format=args.format)
    elif args.command == "bench":
        modes = MODES if args.mode == "both" else (args.mode,)
        commands.cmd_bench(args.checkpoint, modes, trials=args.trials, out_csv=args.out, seed=args.seed)
    elif args.command == "synth-corpus":
        commands.cmd_synth_corpus(args.spec, args.output, seed=args.seed)


def main(argv: Optional[List[str]] = None) -> int:
    """Run one verb; returns the process exit code"""
    args = build_parser().parse_args(argv)
    try:
        if args.log_level:
            try:
                logging.getLogger().setLevel(args.log_level.upper())
            except ValueError as e:
                raise ConfigurationError(f"Unknown log level '{args.log_level}'") from e
        dispatch(args)
    except RaveError as e:
        logger.debug("Command failed", exc_info=True)
        print(error_line(e), file=sys.stderr)
        return exit_code_for(e)
    except Exception as e:
        logger.error(f"Unexpected failure in '{args.command}': {e}", exc_info=True)
        print(error_line(e), file=sys.stderr)
        return EXIT_OTHER
    return EXIT_OK
