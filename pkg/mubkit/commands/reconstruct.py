import argparse
from pathlib import Path

import numpy as np
import structlog
from scipy import linalg

from mubkit.config import get_settings
from mubkit.domain.models import ProbabilityTablePayload, StateFile, SuiteFile
from mubkit.errors import InputFileError
from mubkit.services.cmat import matrix_from_payload, matrix_to_payload
from mubkit.services.mub import MubSuite
from mubkit.services.recon import reconstruct_composite, reconstruct_prime_power, table_from_payload
from mubkit.services.suite import get_suite_service
from mubkit.services.tomo import positivity_fix, trace_distance
from mubkit.storage import get_store

logger = structlog.get_logger()


def register(subparsers):
    parser = subparsers.add_parser(
        "reconstruct",
        help="exact state reconstruction from a complete probability table",
    )
    parser.add_argument("--probs", type=Path, required=True, help="probability table file")
    parser.add_argument("--system", type=Path, required=True, help="suite file written by gen")
    parser.add_argument("--out", type=Path, required=True, help="state file")
    parser.add_argument(
        "--lenient",
        action="store_true",
        help="average slot marginals that disagree across settings instead of rejecting the table",
    )
    parser.add_argument("--state", type=Path, help="known state file to report the trace distance against")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    store = get_store()
    context = get_suite_service().context_from_file(store.read(args.system, SuiteFile))
    table = table_from_payload(store.read(args.probs, ProbabilityTablePayload), context)

    if isinstance(context, MubSuite):
        raw = reconstruct_prime_power(table, context)
    else:
        raw = reconstruct_composite(table, context, strict=not args.lenient)

    repaired = positivity_fix(raw)
    trace = float(np.trace(raw).real)
    min_eig = float(np.min(linalg.eigvalsh((raw + raw.conj().T) / 2)))

    distance = None
    if args.state is not None:
        known = matrix_from_payload(store.read(args.state, StateFile).state)
        if known.shape != raw.shape:
            raise InputFileError(f"known state has shape {known.shape}, reconstruction has {raw.shape}")
        distance = trace_distance(raw, known)

    state_file = StateFile(
        format_version=get_settings().FORMAT_VERSION,
        d=context.d,
        state=matrix_to_payload(repaired.mat),
        raw=matrix_to_payload(raw),
        trace=trace,
        min_eigenvalue=min_eig,
        degenerate=repaired.degenerate,
        trace_distance=distance,
    )
    store.write(args.out, state_file)

    print(f"trace={trace:.12g} min_eigenvalue={min_eig:.6g}")
    if distance is not None:
        print(f"trace_distance={distance:.3e}")
    if repaired.degenerate:
        print("warning: no positive part survived; wrote the maximally mixed state")
    return 0
