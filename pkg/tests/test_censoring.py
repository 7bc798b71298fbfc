"""Tests for jointconcordance.censoring"""
import numpy as np
import pytest

from jointconcordance.censoring import (
    CensoringModel,
    fit_km_censoring,
    survival_at,
    survival_before,
)
from jointconcordance.core import validate_dataset


def dataset(pairs):
    """Dataset from (time, event) pairs."""
    return validate_dataset(
        [{"time": t, "event": e, "covariates": [0.0]} for t, e in pairs]
    )


def test_no_censoring():
    """Test G = 1 without censored records."""
    g = fit_km_censoring(dataset([(1, 1), (2, 2), (3, 1)]))
    assert g.jump_times == []
    assert survival_at(g, 100.0) == 1.0
    assert survival_before(g, 0.0) == 1.0


def test_reverse_km():
    """Test the product-limit estimate with censoring as the event."""
    g = fit_km_censoring(dataset([(1, 1), (2, 0), (3, 1), (4, 0)]))
    assert g.jump_times == [2.0, 4.0]
    assert g.survival_values == pytest.approx([2 / 3, 0.0])


def test_left_and_right_limits():
    """Test G(t-) and G(t) around a jump."""
    g = fit_km_censoring(dataset([(1, 1), (2, 0), (3, 1), (4, 0)]))
    assert survival_before(g, 2.0) == 1.0
    assert survival_at(g, 2.0) == pytest.approx(2 / 3)
    assert survival_at(g, 3.5) == pytest.approx(2 / 3)
    assert survival_before(g, 4.0) == pytest.approx(2 / 3)
    assert survival_at(g, 4.0) == 0.0


def test_tied_event_stays_at_risk():
    """Test that an event tied with a censoring is still at risk."""
    g = fit_km_censoring(dataset([(1, 0), (1, 1), (2, 2), (3, 0)]))
    assert g.survival_values == pytest.approx([0.75, 0.0])


def test_vectorized():
    """Test evaluation at several times."""
    g = CensoringModel(jump_times=[2.0, 4.0], survival_values=[0.5, 0.25])
    values = survival_at(g, np.array([0.0, 2.0, 3.0, 5.0]))
    assert list(values) == [1.0, 0.5, 0.5, 0.25]


def test_monotone():
    """Test that G is nonincreasing."""
    times = np.random.default_rng(1).exponential(size=200)
    events = np.random.default_rng(2).integers(0, 3, size=200)
    g = fit_km_censoring(
        validate_dataset(
            [
                {"time": t, "event": int(e), "covariates": [0.0]}
                for t, e in zip(times, events)
            ]
        )
    )
    assert np.all(np.diff(g.survival_values) <= 0)
    assert 0.0 <= g.survival_values[-1] <= 1.0


def test_negative_time():
    """Test that negative times are rejected."""
    g = CensoringModel(jump_times=[1.0], survival_values=[0.5])
    with pytest.raises(ValueError):
        survival_at(g, -1.0)

    with pytest.raises(ValueError):
        survival_before(g, [1.0, -0.5])


def test_json():
    """Test that a censoring model survives JSON."""
    g = fit_km_censoring(dataset([(1, 1), (2, 0), (3, 1), (4, 0)]))
    loaded = CensoringModel.from_json(g.payload())
    assert loaded.jump_times == g.jump_times
    assert loaded.survival_at(3.0) == g.survival_at(3.0)


def test_matches_risk_set_counting():
    """Test the estimator against direct risk-set counts on small samples."""
    rng = np.random.default_rng(12)
    for _ in range(50):
        n = int(rng.integers(2, 21))
        times = rng.integers(1, 7, size=n).astype(float)
        events = rng.integers(0, 3, size=n)
        events[0] = 1
        g = fit_km_censoring(dataset(zip(times.tolist(), events.tolist())))

        expected = []
        survival = 1.0
        for c in np.unique(times[events == 0]):
            at_risk = np.sum(times >= c)
            censored = np.sum((times == c) & (events == 0))
            survival *= 1.0 - censored / at_risk
            expected.append(survival)

        assert g.jump_times == np.unique(times[events == 0]).tolist()
        assert g.survival_values == pytest.approx(expected)

        for t in np.arange(0.0, 8.0, 0.5):
            product = np.prod(
                [
                    1.0 - np.sum((times == c) & (events == 0)) / np.sum(times >= c)
                    for c in np.unique(times[(events == 0) & (times <= t)])
                ]
            )
            assert survival_at(g, t) == pytest.approx(product)
