"""Tests for jointconcordance.models"""
import numpy as np
import pytest

from jointconcordance.core import Dataset
from jointconcordance.errors import (
    DimensionMismatch,
    InsufficientEvents,
    MonotoneLikelihoodDivergence,
    NonConvergence,
)
from jointconcordance.models import (
    AntitheticScoreModel,
    CauseSpecificPH,
    ColumnScoreModel,
    ExpModel,
    FitConfig,
    csc_risk,
    exp_model_risks,
    exp_model_type,
    fit_cause_specific,
    partial_likelihood_gradient,
    partial_log_likelihood,
)
from jointconcordance.synth import (
    EventSpecificConfig,
    SynthConfig,
    generate,
    generate_event_specific,
)


def event_specific(n=2000, seed=0):
    """Cohort where x1 drives event 1 and x2 drives event 2."""
    return generate_event_specific(EventSpecificConfig(n=n, seed=seed))


def test_exp_model():
    """Test the closed-form EXP model."""
    assert exp_model_risks(0.0, 1.0, 1) == 1.0
    assert exp_model_risks(0.0, 1.0, 2) == 2.0
    assert exp_model_risks(-1.0, 5.0, 2) == pytest.approx(2 * np.exp(-1))
    assert exp_model_type(0.0, 1.0) == 2
    assert exp_model_type(1.0, 1.0) == 1
    assert exp_model_type(-3.0, 1.0) == 2


def test_exp_model_dimension():
    """Test that the EXP model needs one covariate."""
    with pytest.raises(DimensionMismatch):
        ExpModel().risk_matrix(np.zeros((3, 2)), 1.0)


def test_score_models():
    """Test column and antithetic score models."""
    covariates = np.array([[0.2, 0.9], [0.7, 0.1]])
    assert ColumnScoreModel().risk_matrix(covariates, 1.0).tolist() == [
        [0.2, 0.9],
        [0.7, 0.1],
    ]
    assert ColumnScoreModel(columns=[1, 0]).predict_types(covariates, 1.0).tolist() == [
        1,
        2,
    ]
    assert AntitheticScoreModel().risk_matrix(covariates, 1.0)[:, 1] == pytest.approx(
        [0.8, 0.3]
    )

    with pytest.raises(DimensionMismatch):
        AntitheticScoreModel(column=2).risk_matrix(covariates, 1.0)


def test_fit_recovers_coefficients():
    """Test that cause-specific fits recover event-specific effects."""
    model = fit_cause_specific(event_specific())
    beta = np.asarray(model.coefficients)

    assert beta.shape == (2, 3)
    assert beta[0] == pytest.approx([1.0, 0.0, 0.0], abs=0.15)
    assert beta[1] == pytest.approx([0.0, 1.0, 0.0], abs=0.15)
    assert model.covariate_names == ["x1", "x2", "x3"]


def test_fit_is_stationary():
    """Test that the fitted coefficients zero the score vector."""
    ds = event_specific(n=500)
    model = fit_cause_specific(ds)
    for k in (1, 2):
        beta = model.coefficients[k - 1]
        assert partial_likelihood_gradient(ds, beta, k) == pytest.approx(
            np.zeros(3), abs=1e-6
        )
        assert partial_log_likelihood(ds, beta, k) >= partial_log_likelihood(
            ds, np.zeros(3), k
        )


def test_cumulative_incidence():
    """Test that predicted incidences are valid."""
    ds = event_specific(n=500)
    model = fit_cause_specific(ds)
    early = model.risk_matrix(ds.covariates, 0.1)
    late = model.risk_matrix(ds.covariates, float(ds.times.max()))

    assert np.all(early >= 0)
    assert np.all(late >= early)
    assert np.all(late.sum(axis=1) <= 1 + 1e-9)
    assert model.risk_matrix(ds.covariates, 0.0).sum() == 0.0
    assert csc_risk(model, ds.covariates[0], 0.5, 2) == pytest.approx(
        model.risk_matrix(ds.covariates[:1], 0.5)[0, 1]
    )

    with pytest.raises(ValueError):
        csc_risk(model, ds.covariates[0], -1.0, 1)


def test_baseline_hazard():
    """Test the Breslow baseline."""
    model = fit_cause_specific(event_specific(n=500))
    times = model.baseline_times[0]
    assert model.cumulative_hazard(1, times[0] / 2) == 0.0
    assert model.cumulative_hazard(1, times[-1]) == model.baseline_hazard[0][-1]
    assert np.all(np.diff(model.baseline_hazard[0]) > 0)


def test_json():
    """Test that a fitted model survives JSON."""
    ds = event_specific(n=300)
    model = fit_cause_specific(ds)
    loaded = CauseSpecificPH.from_json(model.payload())
    assert loaded.risk_matrix(ds.covariates, 1.0) == pytest.approx(
        model.risk_matrix(ds.covariates, 1.0)
    )


def test_workers():
    """Test that concurrent fits agree with sequential fits."""
    ds = event_specific(n=500)
    assert np.asarray(FitConfig(workers=2).fit(ds).coefficients) == pytest.approx(
        np.asarray(FitConfig().fit(ds).coefficients)
    )


def test_insufficient_events():
    """Test InsufficientEvents."""
    ds = Dataset.from_arrays(
        np.arange(12, dtype=float).reshape(4, 3),
        [1.0, 2.0, 3.0, 4.0],
        [1, 1, 2, 0],
    )
    with pytest.raises(InsufficientEvents) as error:
        fit_cause_specific(ds)

    assert error.value.details["required"] == 4


def test_divergence():
    """Test separated data."""
    times = np.arange(1.0, 21.0)
    ds = Dataset.from_arrays(-times, times, [1, 2] * 10)
    with pytest.raises(MonotoneLikelihoodDivergence):
        fit_cause_specific(ds)


def test_non_convergence():
    """Test NonConvergence."""
    with pytest.raises(NonConvergence):
        fit_cause_specific(event_specific(n=500), max_iter=1)


def test_gradient_matches_finite_differences():
    """Test the score vector against central differences."""
    ds = event_specific(n=200, seed=3)
    beta = np.array([0.3, -0.2, 0.5])
    h = 1e-5
    for k in (1, 2):
        numeric = [
            (
                partial_log_likelihood(ds, beta + h * unit, k)
                - partial_log_likelihood(ds, beta - h * unit, k)
            )
            / (2 * h)
            for unit in np.eye(3)
        ]
        assert partial_likelihood_gradient(ds, beta, k) == pytest.approx(
            numeric, rel=1e-5, abs=1e-6
        )


def test_newton_matches_grid_search():
    """Test fitted coefficients against a grid maximum on five subjects."""
    rng = np.random.default_rng(11)
    grid = np.linspace(-8.0, 8.0, 3201)
    checked = 0
    for _ in range(20):
        ds = Dataset.from_arrays(
            rng.normal(size=5), rng.permutation(5) + 1.0, [1, 2, 1, 2, 1]
        )
        try:
            model = fit_cause_specific(ds)
        except MonotoneLikelihoodDivergence:
            continue

        for k in (1, 2):
            values = [partial_log_likelihood(ds, [beta], k) for beta in grid]
            best = int(np.argmax(values))
            if best in (0, len(grid) - 1):
                continue

            assert model.coefficients[k - 1][0] == pytest.approx(grid[best], abs=6e-3)
            assert partial_log_likelihood(
                ds, model.coefficients[k - 1], k
            ) >= max(values) - 1e-9
            checked += 1

    assert checked >= 5


def test_fit_large_cohorts():
    """Test fits on 5000-subject cohorts of the default generator."""
    for seed in (3, 4, 9):
        ds = generate(SynthConfig(n=5000, seed=seed))
        model = fit_cause_specific(ds)
        assert model.coefficients[0][0] == pytest.approx(1.0, abs=0.1)
        assert max(model.iterations) < 100


def test_identical_covariates():
    """Test that constant covariates give zero coefficients."""
    ds = Dataset.from_arrays(
        np.full((30, 2), 0.5), np.arange(1.0, 31.0), [1, 2, 0] * 10
    )
    model = fit_cause_specific(ds)
    assert model.coefficients == [[0.0, 0.0], [0.0, 0.0]]
    assert model.iterations == [0, 0]


def test_single_event_identity():
    """Test that with one event type the incidence is one minus survival."""
    ds = event_specific(n=400, seed=4).lumped()
    model = fit_cause_specific(ds)
    t = float(np.median(ds.times))
    increments = np.diff(np.concatenate(([0.0], model.baseline_hazard[0])))
    increments = increments[np.asarray(model.baseline_times[0]) <= t]

    hazards = np.exp(model.linear_predictors(ds.covariates))[:, :1] * increments
    survival = np.prod(1.0 - np.minimum(hazards, 1.0), axis=1)
    assert model.risk_matrix(ds.covariates, t)[:, 0] == pytest.approx(
        1.0 - survival, abs=1e-12
    )


def test_csc_risk_monotone():
    """Test that incidences do not decrease in time."""
    ds = event_specific(n=300, seed=5)
    model = fit_cause_specific(ds)
    rng = np.random.default_rng(6)
    times = np.sort(rng.uniform(0.0, float(ds.times.max()) * 1.2, size=25))
    for x in rng.normal(size=(10, 3)):
        for k in (1, 2):
            risks = [csc_risk(model, x, t, k) for t in times]
            assert np.all(np.diff(risks) >= -1e-15)
