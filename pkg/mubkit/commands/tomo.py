import argparse
from pathlib import Path
from typing import List

import pandas as pd
import structlog

from mubkit.config import get_settings
from mubkit.domain.models import StateFile
from mubkit.domain.tomography import RepairMethod, ShotConfig
from mubkit.errors import InputFileError, MubkitError
from mubkit.services.cmat import DensityMatrix, matrix_from_payload
from mubkit.services.suite import get_suite_service
from mubkit.services.tomo import random_state, run_experiment, run_sweep, state_stream, sweep_frame
from mubkit.storage import get_store

logger = structlog.get_logger()


def _shots_list(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("shot counts must be positive")
    return values


def register(subparsers):
    parser = subparsers.add_parser(
        "tomo",
        help="simulate finite-shot tomography of a state",
    )
    parser.add_argument("--state", type=Path, help="state file; a random full-rank state is drawn from --seed if omitted")
    parser.add_argument("--d", type=int, required=True, help="Hilbert space dimension")
    parser.add_argument("--shots", type=int, help="shots per measurement setting")
    parser.add_argument("--trials", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0, help="unsigned 64-bit seed")
    parser.add_argument("--out", type=Path, required=True, help="report file")
    parser.add_argument("--exact", action="store_true", help="feed exact probabilities instead of sampled counts")
    parser.add_argument("--sweep", type=_shots_list, help="comma-separated shot counts; writes a medians table")
    parser.add_argument("--metrics-only", action="store_true", help="omit matrices from the report")
    parser.add_argument("--repair", choices=[m.value for m in RepairMethod], default=None)
    parser.set_defaults(handler=run)
    return parser


def _load_state(args) -> DensityMatrix:
    if args.state is None:
        return random_state(args.d, state_stream(args.seed))
    state_file = get_store().read(args.state, StateFile)
    mat = matrix_from_payload(state_file.state)
    if mat.shape != (args.d, args.d):
        raise InputFileError(f"state in {args.state} has shape {mat.shape}, --d is {args.d}")
    try:
        return DensityMatrix(mat=mat)
    except ValueError as e:
        raise InputFileError(f"{args.state}: {e}") from e


def run(args: argparse.Namespace) -> int:
    if not 0 <= args.seed < 2**64:
        raise MubkitError(f"seed must be an unsigned 64-bit integer, got {args.seed}")
    repair = RepairMethod(args.repair or get_settings().REPAIR_METHOD)
    context = get_suite_service().context_for_dimension(args.d)
    state = _load_state(args)

    if args.sweep:
        report = run_sweep(state, context, args.sweep, trials=args.trials, seed=args.seed, repair=repair)
        get_store().write(args.out, report)
        with pd.option_context("display.width", 200):
            print(sweep_frame(report).to_string())
        if report.slope is not None:
            print(f"slope={report.slope:.4f}")
        return 0

    if args.shots is None:
        raise MubkitError("--shots is required unless --sweep is given")
    config = ShotConfig(
        shots_per_setting=args.shots,
        seed=args.seed,
        trials=args.trials,
        exact=args.exact,
        repair=repair,
    )
    report = run_experiment(state, context, config, metrics_only=args.metrics_only)
    get_store().write(args.out, report)
    print(" ".join(f"{k}={v:.6g}" for k, v in report.summary.items()))
    return 0
