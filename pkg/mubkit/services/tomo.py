"""
Finite-Shot Tomography

Simulate the d+1 (or prod (d_i + 1)) measurements on a known state, feed the
observed frequencies to the exact reconstruction formulas (plug-in estimator),
repair positivity and score the result.

The raw estimate is affine in the frequencies and therefore unbiased; it can be
indefinite at small shot counts. Repair restores a valid state at the cost of
that unbiasedness.

Random draws: numpy Philox (Philox4x64-10) keyed by
SeedSequence(seed, spawn_key=(setting_index, trial)). Every (setting, trial)
stream is independent of the order in which streams are consumed.
"""

from __future__ import annotations

from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict
from scipy import linalg
from scipy.stats import unitary_group

from mubkit.config import get_settings
from mubkit.domain.tomography import (
    Metrics,
    RepairMethod,
    SettingCounts,
    ShotConfig,
    SweepReport,
    SweepRow,
    TomographyReport,
    TrialResult,
)
from mubkit.errors import ShapeError
from mubkit.services.cmat import (
    CMatrix,
    DensityMatrix,
    as_cmatrix,
    dagger,
    hermitian_deviation,
    identity,
    matrix_to_payload,
    psd_sqrt,
)
from mubkit.services.mub import MeasurementFamily, MubSuite
from mubkit.services.recon import (
    CompositeSystem,
    ProbabilityTable,
    SettingLabel,
    composite_settings,
    product_family,
    reconstruct_composite,
    reconstruct_prime_power,
)
from mubkit.services.weyl import label_to_payload

logger = structlog.get_logger()

Context = Union[MubSuite, CompositeSystem]
StateLike = Union[DensityMatrix, CMatrix]


def _mat(state: StateLike) -> CMatrix:
    return as_cmatrix(state.mat if isinstance(state, DensityMatrix) else state)


def context_dim(context: Context) -> int:
    return context.d


def measurement_settings(context: Context) -> List[Tuple[SettingLabel, MeasurementFamily]]:
    """(label, family) in setting order; the position is the setting index."""
    if isinstance(context, MubSuite):
        return [(fam.label, fam) for fam in context.families]
    return [(s, product_family(context, s)) for s in composite_settings(context)]


def setting_label_payload(label: SettingLabel):
    if isinstance(label, tuple):
        return [label_to_payload(a) for a in label]
    return label_to_payload(label)


# =============================================================================
# Measurement simulation
# =============================================================================

def born_probs(rho: StateLike, family: MeasurementFamily) -> np.ndarray:
    """p_j = Tr rho P_j, clipped to [0, 1]."""
    m = _mat(rho)
    if m.shape != family.projectors.shape[1:]:
        raise ShapeError(f"state of shape {m.shape} measured by family on dimension {family.dim}")
    p = np.einsum("ij,zji->z", m, family.projectors).real
    tol = get_settings().PROB_CLIP_TOL
    if np.min(p) < -tol or np.max(p) > 1 + tol:
        logger.debug("Clipping Born probabilities", family=family.name, low=float(np.min(p)), high=float(np.max(p)))
    return np.clip(p, 0.0, 1.0)


def stream(seed: int, setting_index: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(setting_index, trial))))


STATE_STREAM_KEY = 2**32 - 1


def state_stream(seed: int) -> np.random.Generator:
    """Stream for drawing the true state; its spawn key never collides with (setting, trial)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(STATE_STREAM_KEY,))))


def sample_counts(probs: Sequence[float], config: ShotConfig, setting_index: int, trial: int = 0) -> np.ndarray:
    """Multinomial draw by inverse CDF over the fixed outcome order."""
    probs = np.asarray(probs, dtype=np.float64)
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    u = stream(config.seed, setting_index, trial).random(config.shots_per_setting)
    outcomes = np.searchsorted(cdf, u, side="right")
    return np.bincount(outcomes, minlength=probs.size)


# =============================================================================
# Estimation
# =============================================================================

def estimate(counts: Mapping[SettingLabel, Sequence[float]], context: Context) -> CMatrix:
    """Plug-in estimator: frequencies through the exact reconstruction."""
    freqs = {}
    for label, c in counts.items():
        c = np.asarray(c, dtype=np.float64)
        total = c.sum()
        freqs[label] = c / total if total > 0 else c
    table = ProbabilityTable.from_mapping(freqs)
    if isinstance(context, MubSuite):
        return reconstruct_prime_power(table, context)
    # empirical slot marginals differ across ignored settings; average them
    return reconstruct_composite(table, context, strict=False)


class RepairedState(BaseModel):
    state: DensityMatrix
    degenerate: bool = False
    method: RepairMethod = RepairMethod.POSITIVE_PART

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def mat(self) -> CMatrix:
        return self.state.mat


def _symmetrize(raw: CMatrix) -> CMatrix:
    raw = as_cmatrix(raw)
    dev = hermitian_deviation(raw)
    if dev > 1e-8:
        logger.warning("Repairing a non-Hermitian estimate", max_deviation=dev)
    return (raw + dagger(raw)) / 2


def _wizard_eigenvalues(vals: np.ndarray) -> np.ndarray:
    """Closest unit-sum nonnegative spectrum; `vals` ascending, unit sum."""
    desc = vals[::-1].astype(np.float64)
    out = np.zeros_like(desc)
    i = desc.size
    acc = 0.0
    while i > 0 and desc[i - 1] + acc / i < 0:
        acc += desc[i - 1]
        i -= 1
    if i:
        out[:i] = desc[:i] + acc / i
    return out[::-1]


def positivity_fix(raw: CMatrix, method: Optional[RepairMethod] = None) -> RepairedState:
    """
    Map a Hermitian unit-trace estimate to a density matrix.

    Falls back to I/d with degenerate=True when nothing positive survives.
    """
    method = RepairMethod(get_settings().REPAIR_METHOD) if method is None else RepairMethod(method)
    a = _symmetrize(raw)
    d = a.shape[0]
    vals, vecs = linalg.eigh(a)
    tiny = get_settings().PROB_CLIP_TOL

    if method is RepairMethod.POSITIVE_PART:
        new = np.clip(vals, 0.0, None)
    elif method is RepairMethod.MODULUS:
        new = np.abs(vals)
    else:
        tr = float(np.sum(vals))
        new = _wizard_eigenvalues(vals / tr) if tr > tiny else np.zeros_like(vals)

    total = float(np.sum(new))
    if total <= tiny:
        logger.info("Positivity repair degenerate, falling back to maximally mixed", d=d, method=method.value)
        return RepairedState(state=DensityMatrix(mat=identity(d) / d), degenerate=True, method=method)

    repaired = (vecs * (new / total)) @ dagger(vecs)
    repaired = (repaired + dagger(repaired)) / 2
    return RepairedState(state=DensityMatrix(mat=repaired), method=method)


# =============================================================================
# Metrics
# =============================================================================

def _pair(rho: StateLike, sigma: StateLike) -> Tuple[CMatrix, CMatrix]:
    a, b = _mat(rho), _mat(sigma)
    if a.shape != b.shape:
        raise ShapeError(f"cannot compare states of shapes {a.shape} and {b.shape}")
    return a, b


def trace_distance(rho: StateLike, sigma: StateLike) -> float:
    a, b = _pair(rho, sigma)
    delta = a - b
    return 0.5 * float(np.sum(np.abs(linalg.eigvalsh((delta + dagger(delta)) / 2))))


def fidelity(rho: StateLike, sigma: StateLike) -> float:
    """(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    a, b = _pair(rho, sigma)
    root = psd_sqrt(a)
    inner = root @ b @ root
    vals = linalg.eigvalsh((inner + dagger(inner)) / 2)
    return float(np.clip(np.sum(np.sqrt(np.clip(vals, 0.0, None))) ** 2, 0.0, 1.0))


def hs_error(rho: StateLike, sigma: StateLike) -> float:
    a, b = _pair(rho, sigma)
    return float(np.linalg.norm(a - b, "fro"))


def random_state(d: int, rng: np.random.Generator, mixing: float = 0.3) -> DensityMatrix:
    """(1 - mixing) |psi><psi| + mixing I/d with Haar-random psi; full rank for mixing > 0."""
    psi = unitary_group.rvs(d, random_state=rng)[:, 0] if d > 1 else np.ones(1, dtype=np.complex128)
    pure = np.outer(psi, psi.conj())
    rho = (1.0 - mixing) * pure + mixing * identity(d) / d
    return DensityMatrix(mat=(rho + dagger(rho)) / 2)


# =============================================================================
# Experiments
# =============================================================================

def _trial_counts(
    settings: List[Tuple[SettingLabel, MeasurementFamily]],
    probs: List[np.ndarray],
    config: ShotConfig,
    trial: int,
) -> Dict[SettingLabel, np.ndarray]:
    out = {}
    for k, ((label, _), p) in enumerate(zip(settings, probs)):
        if config.exact:
            out[label] = p * config.shots_per_setting
        else:
            out[label] = sample_counts(p, config, k, trial)
    return out


def _counts_payload(counts: Dict[SettingLabel, np.ndarray], exact: bool) -> List[SettingCounts]:
    return [
        SettingCounts(
            label=setting_label_payload(label),
            counts=[float(v) for v in c] if exact else [int(v) for v in c],
        )
        for label, c in counts.items()
    ]


def run_experiment(
    true_state: StateLike,
    context: Context,
    config: ShotConfig,
    metrics_only: bool = False,
) -> TomographyReport:
    rho = _mat(true_state)
    d = context_dim(context)
    if rho.shape != (d, d):
        raise ShapeError(f"state of shape {rho.shape} does not live in dimension {d}")

    settings = measurement_settings(context)
    probs = [born_probs(rho, fam) for _, fam in settings]
    logger.info(
        "Running tomography",
        d=d,
        settings=len(settings),
        shots=config.shots_per_setting,
        trials=config.trials,
        exact=config.exact,
    )

    trials = []
    for trial in range(config.trials):
        counts = _trial_counts(settings, probs, config, trial)
        raw = estimate(counts, context)
        repaired = positivity_fix(raw, config.repair)
        raw_min = float(np.min(linalg.eigvalsh((raw + dagger(raw)) / 2)))
        trials.append(TrialResult(
            trial=trial,
            counts=_counts_payload(counts, config.exact),
            raw_min_eigenvalue=raw_min,
            degenerate=repaired.degenerate,
            raw_estimate=None if metrics_only else matrix_to_payload(raw),
            repaired_estimate=None if metrics_only else matrix_to_payload(repaired.mat),
            raw_metrics=Metrics(trace_distance=trace_distance(raw, rho), hs_error=hs_error(raw, rho)),
            metrics=Metrics(
                trace_distance=trace_distance(repaired.mat, rho),
                hs_error=hs_error(repaired.mat, rho),
                fidelity=fidelity(repaired.mat, rho),
            ),
        ))

    frame = pd.DataFrame([t.metrics.model_dump() for t in trials])
    summary = {f"median_{col}": float(frame[col].median()) for col in frame.columns}
    summary["indefinite_fraction"] = float(np.mean([t.raw_min_eigenvalue < 0 for t in trials]))
    return TomographyReport(
        format_version=get_settings().FORMAT_VERSION,
        d=d,
        config=config,
        true_state=None if metrics_only else matrix_to_payload(rho),
        trials=trials,
        summary=summary,
    )


def run_sweep(
    true_state: StateLike,
    context: Context,
    shots_list: Sequence[int],
    trials: int,
    seed: int,
    repair: RepairMethod = RepairMethod.POSITIVE_PART,
) -> SweepReport:
    """Median errors per shot count and the log-log slope of the trace distance."""
    records = []
    for shots in shots_list:
        config = ShotConfig(shots_per_setting=shots, seed=seed, trials=trials, repair=repair)
        report = run_experiment(true_state, context, config, metrics_only=True)
        for t in report.trials:
            records.append({"shots": shots, **t.metrics.model_dump()})

    medians = pd.DataFrame(records).groupby("shots", sort=True).median()
    rows = [
        SweepRow(
            shots=int(shots),
            trials=trials,
            median_trace_distance=float(row["trace_distance"]),
            median_fidelity=float(row["fidelity"]),
            median_hs_error=float(row["hs_error"]),
        )
        for shots, row in medians.iterrows()
    ]
    slope = None
    if len(rows) >= 2 and all(r.median_trace_distance > 0 for r in rows):
        x = np.log([r.shots for r in rows])
        y = np.log([r.median_trace_distance for r in rows])
        slope = float(np.polyfit(x, y, 1)[0])
    logger.info("Sweep finished", d=context_dim(context), points=len(rows), slope=slope)
    return SweepReport(
        format_version=get_settings().FORMAT_VERSION,
        d=context_dim(context),
        seed=seed,
        repair=repair,
        rows=rows,
        slope=slope,
    )


def sweep_frame(report: SweepReport) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in report.rows]).set_index("shots")
