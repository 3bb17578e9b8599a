"""Command-line entry point: eqtl-dissect {scan,hotspots,dissect,lda,power}."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from src.config import (
    DISSECTION_CONFIG,
    HMM_CONFIG,
    HOTSPOT_CONFIG,
    LDA_CONFIG,
    POWER_CONFIG,
    SCAN_CONFIG,
    SIGNIFICANCE_CONFIG,
)
from src.constants import PATH_POWER_GRID, RESULTS_DIR, MapFunction, NullMethod, SearchMode
from src.entrypoints.main_dissection import Main, RunConfig
from src.utils.classes import Interval
from src.utils.custom_logger import get_logger, set_log_level
from src.utils.errors import ComputationError, DissectionError, InputError

logger = get_logger("CLI")

GLOBAL_KEYS = ("command", "seed", "threads", "out_dir", "verbose", "quiet")


def _bounded(
    kind: Callable, lo: Optional[float] = None, hi: Optional[float] = None, lo_open: bool = False, hi_open: bool = False
):
    """argparse type accepting values of `kind` within [lo, hi] (open ends on request)."""

    def parse(text: str):
        try:
            value = kind(text)
        except ValueError as error:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} value: {text!r}") from error
        if lo is not None and (value < lo or (lo_open and value == lo)):
            raise argparse.ArgumentTypeError(f"{text} must be {'>' if lo_open else '>='} {lo}")
        if hi is not None and (value > hi or (hi_open and value == hi)):
            raise argparse.ArgumentTypeError(f"{text} must be {'<' if hi_open else '<='} {hi}")
        return value

    parse.__name__ = kind.__name__
    return parse


positive_int = _bounded(int, 1)
non_negative_int = _bounded(int, 0)
positive_float = _bounded(float, 0.0, lo_open=True)
non_negative_float = _bounded(float, 0.0)
error_rate = _bounded(float, 0.0, 0.5, hi_open=True)
probability = _bounded(float, 0.0, 1.0, lo_open=True, hi_open=True)


def interval(text: str) -> str:
    try:
        return str(Interval.parse(text))
    except InputError as error:
        raise argparse.ArgumentTypeError(str(error)) from error


def _comma_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _add_cross_inputs(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("cross")
    group.add_argument("--geno", type=Path, required=True, help="genotype CSV: id,<marker>... with BB/BR/RR/NA")
    group.add_argument("--map", type=Path, required=True, help="genetic map CSV: marker,chr,pos_cM")
    group.add_argument("--pheno", type=Path, required=True, help="phenotype CSV: id,<trait>...")
    group.add_argument("--covar", type=Path, help="covariate CSV: id,<column>...")
    group.add_argument("--additive", type=_comma_list, default=[], help="comma-separated additive covariate columns")
    group.add_argument("--interactive", type=_comma_list, default=[], help="comma-separated interactive covariate columns")
    group.add_argument("--trait-meta", type=Path, help="trait annotation CSV: trait,chr,pos_cM")
    group.add_argument("--no-normalize", action="store_true", help="skip the normal-quantile transform of traits")
    group.add_argument(
        "--null-includes-interactive",
        action="store_true",
        help="interactive covariates also enter the null model (default: intercept and additive covariates only)",
    )
    _add_hmm_options(parser)
    group.add_argument("--genoprob-cache", type=Path, help="binary cache of genotype probabilities")


def _add_hmm_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("genotype probabilities")
    group.add_argument("--error-rate", type=error_rate, default=HMM_CONFIG["error_rate"])
    group.add_argument("--map-function", choices=[m.value for m in MapFunction], default=HMM_CONFIG["map_function"])
    group.add_argument("--step", type=positive_float, default=HMM_CONFIG["step"], help="grid spacing in cM")


def _add_hotspot_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("hotspot definition")
    group.add_argument("--hotspot-lod-min", type=non_negative_float, default=HOTSPOT_CONFIG["lod_min"])
    group.add_argument("--window", type=positive_float, default=HOTSPOT_CONFIG["window"])
    group.add_argument("--local-exclusion", type=non_negative_float, default=HOTSPOT_CONFIG["local_exclusion"])
    group.add_argument("--count-min", type=non_negative_int, default=HOTSPOT_CONFIG["count_min"])
    group.add_argument("--pad", type=non_negative_float, default=HOTSPOT_CONFIG["pad"])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=non_negative_int, default=1)
    common.add_argument("--threads", type=positive_int, default=1)
    common.add_argument("--out-dir", type=Path, default=RESULTS_DIR)
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(
        prog="eqtl-dissect",
        description="Detect trans-eQTL hotspots in an F2 intercross and test whether they hold one or two QTL.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    scan = commands.add_parser("scan", parents=[common], help="genome scans of every trait")
    _add_cross_inputs(scan)
    scan.add_argument("--lod-min", type=non_negative_float, default=SCAN_CONFIG["lod_min"])
    scan.add_argument("--curves", action="store_true", help="also write full LOD curves")

    hotspots = commands.add_parser("hotspots", parents=[common], help="trans-eQTL counts and hotspot intervals")
    hotspots.add_argument("--peaks", type=Path, required=True, help="peaks.json written by scan")
    hotspots.add_argument("--map", type=Path, required=True)
    hotspots.add_argument("--trait-meta", type=Path)
    hotspots.add_argument("--step", type=positive_float, default=HMM_CONFIG["step"])
    _add_hotspot_options(hotspots)

    dissect = commands.add_parser("dissect", parents=[common], help="one-vs-two QTL test for a hotspot")
    _add_cross_inputs(dissect)
    _add_hotspot_options(dissect)
    dissect.add_argument("--peaks", type=Path, required=True)
    dissect.add_argument("--interval", type=interval, required=True, help="chr:lo-hi")
    dissect.add_argument("--traits", type=_comma_list, help="explicit trait list instead of the top traits")
    dissect.add_argument("--top", type=positive_int, default=DISSECTION_CONFIG["top_k"])
    dissect.add_argument("--mode", choices=[m.value for m in SearchMode], default=DISSECTION_CONFIG["mode"])
    dissect.add_argument("--starts", type=positive_int, default=DISSECTION_CONFIG["starts"])
    same_chr = dissect.add_mutually_exclusive_group()
    same_chr.add_argument(
        "--exclude-same-chr", dest="exclude_same_chr", action="store_true", default=DISSECTION_CONFIG["exclude_same_chr"]
    )
    same_chr.add_argument("--include-same-chr", dest="exclude_same_chr", action="store_false")
    dissect.add_argument("--method", choices=[m.value for m in NullMethod], default=SIGNIFICANCE_CONFIG["method"])
    dissect.add_argument("--n-reps", type=non_negative_int, default=SIGNIFICANCE_CONFIG["n_reps"], help="0 skips the p-value")
    dissect.add_argument("--plus-one", action="store_true", help="p-value (r + 1) / (N + 1)")
    dissect.add_argument("--permute-covariates", action="store_true", help="covariate rows move with permuted phenotypes")

    lda = commands.add_parser("lda", parents=[common], help="discriminant scatter data for a hotspot")
    _add_cross_inputs(lda)
    _add_hotspot_options(lda)
    lda.add_argument("--peaks", type=Path, required=True)
    lda.add_argument("--interval", type=interval, required=True)
    lda.add_argument("--traits", type=_comma_list)
    lda.add_argument("--top", type=positive_int, default=LDA_CONFIG["top_k"])
    lda.add_argument("--ridge", type=non_negative_float, default=LDA_CONFIG["ridge"])
    positions = lda.add_mutually_exclusive_group()
    positions.add_argument("--lambdas", type=float, nargs=2, metavar=("L1", "L2"), help="positions for two-locus labels")
    positions.add_argument("--dissection", type=Path, help="dissection.json providing the two-locus positions")

    power = commands.add_parser("power", parents=[common], help="power study on simulated crosses")
    power.add_argument("--grid", type=Path, default=PATH_POWER_GRID)
    power.add_argument("--panels", type=_comma_list)
    power.add_argument("--a", type=non_negative_float, help="single scenario: additive effect")
    power.add_argument("--distance", type=non_negative_float, help="single scenario: QTL distance in cM")
    power.add_argument("--p", type=_bounded(int, 2))
    power.add_argument("--left-count", type=non_negative_int)
    power.add_argument("--n-ind", type=positive_int)
    power.add_argument("--n-markers", type=_bounded(int, 2))
    power.add_argument("--chr-length", type=positive_float)
    power.add_argument("--n-reps", type=positive_int)
    power.add_argument("--null-reps", type=positive_int)
    power.add_argument("--alpha", type=probability, default=POWER_CONFIG["alpha"])
    return parser


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    options = {k: v for k, v in vars(args).items() if k not in GLOBAL_KEYS}
    return RunConfig(
        command=args.command,
        seed=args.seed,
        threads=args.threads,
        out_dir=args.out_dir,
        progress=not args.quiet,
        options=options,
    )


def cmd_scan(config: RunConfig):
    return Main(config).scan()


def cmd_hotspots(config: RunConfig):
    return Main(config).hotspots()


def cmd_dissect(config: RunConfig):
    return Main(config).dissect()


def cmd_lda(config: RunConfig):
    return Main(config).lda()


def cmd_power(config: RunConfig):
    return Main(config).power()


COMMANDS = {"scan": cmd_scan, "hotspots": cmd_hotspots, "dissect": cmd_dissect, "lda": cmd_lda, "power": cmd_power}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run a subcommand; returns 0 on success, 1 on computation failure and 2 on bad input."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return int(error.code or 0)
    if args.quiet:
        set_log_level(logging.WARNING)
    elif args.verbose:
        set_log_level(logging.DEBUG)

    try:
        config = run_config_from_args(args)
        logger.info(f"Running {config.command} with seed {config.seed}")
        COMMANDS[config.command](config)
    except InputError as error:
        logger.error(f"Input error: {error}")
        return error.exit_code
    except ComputationError as error:
        logger.error(f"Computation failed: {error}")
        return error.exit_code
    except DissectionError as error:
        logger.error(str(error))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
