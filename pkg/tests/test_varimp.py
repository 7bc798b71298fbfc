"""Tests for jointconcordance.varimp"""
import numpy as np
import pytest

from jointconcordance.core import Dataset, evaluation_horizon
from jointconcordance.synth import (
    EventSpecificConfig,
    SynthConfig,
    generate,
    generate_event_specific,
)
from jointconcordance.varimp import (
    K_FOLD,
    STANDARDIZED_COEF,
    STEPWISE_CR,
    STEPWISE_LUMPED,
    RankingEntry,
    RankingResult,
    format_ranking_table,
    rank_variables,
    standardized_coef_rank,
    stepwise_cr_rank,
    stepwise_lumped_rank,
)


def event_specific():
    """x1 drives event 1, x2 drives event 2 and x3 is noise."""
    ds = generate_event_specific(EventSpecificConfig(n=1000, seed=1))
    return ds, evaluation_horizon(ds)


def test_stepwise_cr():
    """Test that joint concordance ranks noise last."""
    ds, t = event_specific()
    result = stepwise_cr_rank(ds, t)

    assert result.method == STEPWISE_CR
    assert result.ranking()[-1] == "x3"
    assert [entry.round for entry in result.entries] == [1, 2, 3]
    assert [entry.rank for entry in result.entries] == [3, 2, 1]
    assert result.baseline_metric is not None
    assert result.entries[0].delta == pytest.approx(
        result.entries[0].metric - result.baseline_metric
    )
    assert result.failures == []


def test_stepwise_lumped():
    """Test backward elimination with lumped events."""
    ds, t = event_specific()
    result = stepwise_lumped_rank(ds, t)
    assert result.method == STEPWISE_LUMPED
    assert result.ranking()[-1] == "x3"


def test_standardized_coef():
    """Test ranking by standardized coefficients."""
    ds, t = event_specific()
    result = standardized_coef_rank(ds, t)
    assert result.method == STANDARDIZED_COEF
    assert result.ranking()[-1] == "x3"
    assert result.entries[0].rank == 3
    assert result.entries[-1].metric >= result.entries[0].metric


def test_workers():
    """Test that threaded candidate refits give the same ranking."""
    ds, t = event_specific()
    assert (
        stepwise_cr_rank(ds, t, workers=3).ranking()
        == stepwise_cr_rank(ds, t).ranking()
    )


def test_k_fold():
    """Test out-of-sample evaluation."""
    ds, t = event_specific()
    result = rank_variables(ds, t, STEPWISE_CR, evaluation=K_FOLD, folds=3, seed=2)
    assert result.evaluation == K_FOLD
    assert sorted(result.ranking()) == ["x1", "x2", "x3"]

    with pytest.raises(ValueError):
        rank_variables(ds, t, STEPWISE_CR, evaluation=K_FOLD, folds=1)


def test_single_covariate():
    """Test that one covariate gives a trivial ranking."""
    ds = generate(SynthConfig(n=300, seed=3))
    result = stepwise_cr_rank(ds, evaluation_horizon(ds))
    assert result.ranking() == ["x"]
    assert result.entries[0].rank == 1


def test_unknown_method():
    """Test an unknown ranking method."""
    ds, t = event_specific()
    with pytest.raises(ValueError):
        rank_variables(ds, t, "lasso")

    with pytest.raises(ValueError):
        rank_variables(ds, t, STEPWISE_CR, evaluation="bootstrap")


def test_ranking_table():
    """Test the side-by-side ranking table."""
    first = RankingResult(
        method=STEPWISE_CR,
        horizon=1.0,
        entries=[
            RankingEntry(covariate="x3", round=1, rank=2),
            RankingEntry(covariate="x1", round=2, rank=1),
        ],
    )
    second = RankingResult(
        method=STEPWISE_LUMPED,
        horizon=1.0,
        entries=[RankingEntry(covariate="x2", round=1, rank=1)],
    )
    assert format_ranking_table([first, second]).splitlines() == [
        "rank  stepwise_cr  stepwise_lumped",
        "1     x1           x2",
        "2     x3           -",
    ]


def test_constant_covariate_dropped_first():
    """Test that a covariate without variation is eliminated in round 1."""
    ds, t = event_specific()
    padded = Dataset.from_arrays(
        np.column_stack((ds.covariates, np.full(len(ds), 2.0))),
        ds.times,
        ds.events,
        covariate_names=["x1", "x2", "x3", "c"],
    )
    result = stepwise_cr_rank(padded, t)
    assert result.entries[0].covariate == "c"
    assert result.entries[0].delta == pytest.approx(0.0, abs=1e-9)


def test_single_event_type_methods_agree():
    """Test that both stepwise methods agree when there is one event type."""
    ds, t = event_specific()
    lumped = ds.lumped()
    by_jc = stepwise_cr_rank(lumped, t)
    by_c = stepwise_lumped_rank(lumped, t)

    assert by_jc.ranking() == by_c.ranking()
    assert [entry.metric for entry in by_jc.entries[:-1]] == pytest.approx(
        [entry.metric for entry in by_c.entries[:-1]]
    )
