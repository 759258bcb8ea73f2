import numpy as np
import pytest
from pydantic import ValidationError
from scipy.stats import unitary_group

from mubkit.domain.tomography import RepairMethod, ShotConfig, TomographyReport
from mubkit.services.cmat import DensityMatrix, identity, matrix_from_payload
from mubkit.services.mub import mub_suite_for_dimension
from mubkit.services.recon import CompositeSystem, composite_settings, product_family
from mubkit.services.tomo import (
    born_probs,
    estimate,
    fidelity,
    hs_error,
    positivity_fix,
    random_state,
    run_experiment,
    run_sweep,
    sample_counts,
    state_stream,
    sweep_frame,
    trace_distance,
)
from mubkit.services.weyl import INF


def ket0(d=2):
    m = np.zeros((d, d), dtype=np.complex128)
    m[0, 0] = 1
    return m


# =============================================================================
# Born probabilities and sampling
# =============================================================================

def test_born_probs_examples():
    suite = mub_suite_for_dimension(2)
    assert np.allclose(born_probs(ket0(), suite.family(INF)), [1, 0])
    for fam in suite.families[:-1]:
        assert np.allclose(born_probs(ket0(), fam), [0.5, 0.5])


def test_born_probs_sum_to_one(rng):
    suite = mub_suite_for_dimension(5)
    rho = random_state(5, rng)
    for fam in suite.families:
        p = born_probs(rho, fam)
        assert p.sum() == pytest.approx(1)
        assert np.all(p >= 0)


def test_sample_counts_deterministic():
    config = ShotConfig(shots_per_setting=500, seed=42)
    p = [0.2, 0.3, 0.5]
    first = sample_counts(p, config, setting_index=3, trial=1)
    assert np.array_equal(first, sample_counts(p, config, setting_index=3, trial=1))
    assert first.sum() == 500
    assert not np.array_equal(first, sample_counts(p, config, setting_index=4, trial=1))


def test_sample_counts_support():
    config = ShotConfig(shots_per_setting=1000, seed=7)
    assert np.array_equal(sample_counts([1.0, 0.0], config, 0), [1000, 0])
    counts = sample_counts([0.5, 0.0, 0.5], config, 1)
    assert counts[1] == 0 and counts.sum() == 1000


def test_sample_counts_concentrates():
    n = 10**6
    p = np.array([0.2, 0.3, 0.5])
    counts = sample_counts(p, ShotConfig(shots_per_setting=n, seed=1), 0)
    assert np.all(np.abs(counts - n * p) <= 5 * np.sqrt(n * p * (1 - p)))


def test_shot_config_bounds():
    with pytest.raises(ValidationError):
        ShotConfig(shots_per_setting=0, seed=1)
    with pytest.raises(ValidationError):
        ShotConfig(shots_per_setting=10, seed=-1)
    with pytest.raises(ValidationError):
        ShotConfig(shots_per_setting=10, seed=2**64)


# =============================================================================
# Estimation
# =============================================================================

def test_estimate_from_exact_frequencies(rng):
    suite = mub_suite_for_dimension(3)
    rho = random_state(3, rng).mat
    counts = {fam.label: 1000 * born_probs(rho, fam) for fam in suite.families}
    assert trace_distance(estimate(counts, suite), rho) <= 1e-9


def test_estimate_composite(rng):
    system = CompositeSystem.from_dimension(6)
    rho = random_state(6, rng).mat
    counts = {s: 50 * born_probs(rho, product_family(system, s)) for s in composite_settings(system)}
    assert trace_distance(estimate(counts, system), rho) <= 1e-8


@pytest.mark.parametrize("d", [2, 3, 6])
def test_exact_injection(d):
    context = CompositeSystem.from_dimension(d) if d == 6 else mub_suite_for_dimension(d)
    rho = random_state(d, state_stream(5)).mat
    report = run_experiment(rho, context, ShotConfig(shots_per_setting=100, seed=5, exact=True))
    trial = report.trials[0]
    assert trial.raw_metrics.trace_distance <= 1e-8
    assert trial.metrics.trace_distance <= 1e-8
    assert all(isinstance(v, float) for v in trial.counts[0].counts)


# =============================================================================
# Positivity repair
# =============================================================================

def test_positive_part_examples():
    assert np.allclose(positivity_fix(np.diag([1.1, -0.1])).mat, np.diag([1, 0]))
    assert np.allclose(positivity_fix(np.diag([0.6, 0.6, -0.2])).mat, np.diag([0.5, 0.5, 0]))


def test_state_is_unchanged(rng):
    rho = random_state(4, rng).mat
    for method in RepairMethod:
        assert np.allclose(positivity_fix(rho, method).mat, rho, atol=1e-9)


def test_projection_differs_from_positive_part():
    raw = np.diag([0.5, 0.4, 0.3, -0.2])
    pp = positivity_fix(raw, RepairMethod.POSITIVE_PART).mat
    proj = positivity_fix(raw, RepairMethod.PROJECTION).mat
    assert np.allclose(np.diag(pp).real, np.array([0.5, 0.4, 0.3, 0]) / 1.2)
    assert np.allclose(np.diag(proj).real, [0.5 - 0.2 / 3, 0.4 - 0.2 / 3, 0.3 - 0.2 / 3, 0])


def test_modulus():
    out = positivity_fix(np.diag([1.1, -0.1]), RepairMethod.MODULUS).mat
    assert np.allclose(out, np.diag([11 / 12, 1 / 12]))


def test_repair_keeps_eigenvectors(rng):
    u = unitary_group.rvs(3, random_state=rng)
    raw = u @ np.diag([0.7, 0.5, -0.2]) @ u.conj().T
    out = positivity_fix(raw, RepairMethod.PROJECTION).mat
    assert np.allclose(out, u @ np.diag([0.6, 0.4, 0.0]) @ u.conj().T, atol=1e-9)


@pytest.mark.parametrize("method", list(RepairMethod))
def test_degenerate_falls_back_to_maximally_mixed(method):
    fixed = positivity_fix(np.zeros((3, 3)), method)
    assert fixed.degenerate
    assert np.allclose(fixed.mat, identity(3) / 3)


def test_default_method_from_settings(monkeypatch):
    monkeypatch.setenv("MUBKIT_REPAIR_METHOD", "modulus")
    assert positivity_fix(np.diag([1.1, -0.1])).method is RepairMethod.MODULUS


# =============================================================================
# Metrics
# =============================================================================

def test_metric_examples():
    a, b = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    assert trace_distance(a, b) == pytest.approx(1)
    assert fidelity(a, b) == pytest.approx(0, abs=1e-12)
    assert hs_error(a, b) == pytest.approx(np.sqrt(2))
    assert fidelity(a, identity(2) / 2) == pytest.approx(0.5)
    assert trace_distance(a, a) == 0


def test_fidelity_of_state_with_itself(rng):
    rho = random_state(4, rng)
    assert fidelity(rho, rho) == pytest.approx(1, abs=1e-9)


def test_random_state_is_full_rank():
    rho = random_state(5, state_stream(11))
    assert np.min(np.linalg.eigvalsh(rho.mat)) >= 0.3 / 5 - 1e-12
    assert np.allclose(rho.mat, random_state(5, state_stream(11)).mat)


# =============================================================================
# Experiments
# =============================================================================

def test_run_experiment_is_reproducible():
    suite = mub_suite_for_dimension(3)
    rho = random_state(3, state_stream(42))
    config = ShotConfig(shots_per_setting=200, seed=42, trials=3)
    first = run_experiment(rho, suite, config)
    again = run_experiment(rho, suite, config)
    assert first.model_dump_json() == again.model_dump_json()
    assert len(first.trials) == 3
    assert {"median_trace_distance", "median_fidelity", "median_hs_error", "indefinite_fraction"} <= set(first.summary)


def test_report_json_round_trip():
    suite = mub_suite_for_dimension(2)
    report = run_experiment(np.diag([0.75, 0.25]), suite, ShotConfig(shots_per_setting=50, seed=3, trials=2))
    again = TomographyReport.model_validate_json(report.model_dump_json())
    assert again == report


def test_few_shots_exercise_repair():
    suite = mub_suite_for_dimension(3)
    report = run_experiment(np.diag([1.0, 0.0, 0.0]), suite, ShotConfig(shots_per_setting=5, seed=11, trials=20))
    indefinite = [t for t in report.trials if t.raw_min_eigenvalue < 0]
    assert indefinite
    assert report.summary["indefinite_fraction"] > 0
    for t in indefinite:
        assert not t.degenerate
        repaired = DensityMatrix(mat=matrix_from_payload(t.repaired_estimate))
        assert np.min(np.linalg.eigvalsh(repaired.mat)) >= -1e-9


def test_metrics_only_drops_matrices():
    suite = mub_suite_for_dimension(2)
    report = run_experiment(np.diag([0.75, 0.25]), suite, ShotConfig(shots_per_setting=50, seed=3), metrics_only=True)
    assert report.true_state is None
    assert report.trials[0].raw_estimate is None
    assert report.trials[0].metrics is not None


@pytest.mark.slow
def test_raw_estimate_is_unbiased():
    suite = mub_suite_for_dimension(2)
    rho = np.diag([0.75, 0.25]).astype(np.complex128)
    report = run_experiment(rho, suite, ShotConfig(shots_per_setting=100, seed=2024, trials=2000))
    mean = np.mean([matrix_from_payload(t.raw_estimate) for t in report.trials], axis=0)
    assert np.max(np.abs(mean - rho)) <= 0.01


@pytest.mark.slow
@pytest.mark.parametrize("d", [2, 3])
def test_error_scales_as_inverse_root_shots(d):
    suite = mub_suite_for_dimension(d)
    report = run_sweep(random_state(d, state_stream(9)), suite, [100, 1000, 10000, 100000], trials=50, seed=9)
    assert -0.65 <= report.slope <= -0.35


@pytest.mark.slow
def test_median_error_decreases_with_shots():
    suite = mub_suite_for_dimension(3)
    rho = random_state(3, state_stream(9))
    frame = sweep_frame(run_sweep(rho, suite, [100, 1000, 10000, 100000], trials=50, seed=9))
    assert list(frame.index) == [100, 1000, 10000, 100000]
    assert np.all(np.diff(frame["median_trace_distance"].to_numpy()) < 0)
