"""
Shot-count calibration: median trace distance against shots per setting for a
few dimensions, with the fitted log-log slope. Expect roughly -1/2.

    python scripts/calibrate_tomography.py [seed]
"""

import sys

import pandas as pd
import structlog

from mubkit.domain.tomography import RepairMethod
from mubkit.logging_config import configure_logging
from mubkit.services.suite import get_suite_service
from mubkit.services.tomo import random_state, run_sweep, state_stream, sweep_frame

logger = structlog.get_logger()

DIMENSIONS = [2, 3, 4, 5, 6]
SHOTS = [100, 300, 1000, 3000, 10000]
TRIALS = 40


def calibrate(seed: int) -> pd.DataFrame:
    service = get_suite_service()
    slopes = []
    for d in DIMENSIONS:
        state = random_state(d, state_stream(seed))
        for repair in RepairMethod:
            report = run_sweep(state, service.context_for_dimension(d), SHOTS, trials=TRIALS, seed=seed, repair=repair)
            frame = sweep_frame(report)
            logger.info("Calibrated", d=d, repair=repair.value, slope=report.slope)
            slopes.append({
                "d": d,
                "repair": repair.value,
                "slope": report.slope,
                "td_at_max_shots": float(frame["median_trace_distance"].iloc[-1]),
            })
    return pd.DataFrame(slopes)


if __name__ == "__main__":
    configure_logging()
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    print(calibrate(seed).to_string(index=False))
