"""Tests for jointconcordance.harness"""
import json

import numpy as np
import pytest

from jointconcordance.core import read_dataset, write_dataset
from jointconcordance.errors import NoEventsOfType
from jointconcordance.harness import (
    CSC_MODEL,
    EXP_MODEL,
    ComparisonTable,
    EfficiencyReport,
    ErrorReport,
    RunConfig,
    cmd_evaluate,
    cmd_fit,
    cmd_rank_variables,
    cmd_simulate,
    cmd_simulate_table1,
    cmd_simulate_table2,
    efficiency_row,
    format_text,
    load_model,
    run_output,
)
from jointconcordance.metrics import joint_concordance
from jointconcordance.models import CauseSpecificPH, ExpModel
from jointconcordance.synth import EventSpecificConfig, generate_event_specific

hand_csv = "id,time,event,x\na,1,1,2.0\nb,2,2,0.0\nc,3,1,-1.0\n"


def write_csv(tmp_path, text, name="cohort.csv"):
    """Write CSV text and return its path."""
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_efficiency_identity():
    """Test RMSE^2 = SE^2 + Bias^2."""
    estimates = list(np.random.default_rng(0).normal(0.55, 0.02, size=100))
    row = efficiency_row(estimates, 0.52, EXP_MODEL, 0.5, 1000)
    assert row.rmse ** 2 == pytest.approx(row.se ** 2 + row.bias ** 2, abs=1e-10)
    assert row.replicates == 100
    assert row.bias == pytest.approx(0.03, abs=0.01)


def test_efficiency_without_estimates():
    """Test a configuration where every replicate failed."""
    row = efficiency_row([], 0.52, CSC_MODEL, 0.5, 100, failures={"NonConvergence": 2})
    assert row.mean is None
    assert row.replicates == 0
    assert row.failures == {"NonConvergence": 2}


def test_evaluate_hand_instance(tmp_path):
    """Test the EXP model on a three-subject CSV."""
    config = RunConfig(
        command="evaluate", dataset=write_csv(tmp_path, hand_csv), horizon=10.0
    )
    report = cmd_evaluate(config)
    assert report.joint_concordance == pytest.approx(0.8)
    assert not report.weighted


def test_evaluate_matches_library(tmp_path):
    """Test that the command gives the library result."""
    path = write_csv(tmp_path, hand_csv)
    config = RunConfig(command="evaluate", dataset=path, horizon=10.0)
    expected = joint_concordance(read_dataset(path), ExpModel(), 10.0)
    assert cmd_evaluate(config).payload() == expected.payload()


def test_evaluate_censored_dataset(tmp_path):
    """Test that censored data uses the weighted estimator."""
    simulated = str(tmp_path / "simulated.csv")
    cmd_simulate(
        RunConfig(command="simulate", output=simulated, n=300, censoring_rate=0.3)
    )
    report = cmd_evaluate(RunConfig(command="evaluate", dataset=simulated))
    assert report.weighted
    assert 0 < report.joint_concordance < 1


def test_evaluate_all_censored(tmp_path):
    """Test a dataset without events."""
    path = write_csv(tmp_path, "id,time,event,x\na,1,0,1.0\nb,2,0,0.0\n")
    with pytest.raises(NoEventsOfType):
        cmd_evaluate(RunConfig(command="evaluate", dataset=path))


def test_evaluate_bootstrap(tmp_path):
    """Test bootstrap intervals from the command."""
    simulated = str(tmp_path / "simulated.csv")
    cmd_simulate(RunConfig(command="simulate", output=simulated, n=200))
    config = RunConfig(command="evaluate", dataset=simulated, bootstrap=100, seed=4)
    first = cmd_evaluate(config)
    assert "joint_concordance" in first.bootstrap_ci
    assert cmd_evaluate(config).payload() == first.payload()


def test_evaluate_without_dataset():
    """Test that a dataset is required."""
    with pytest.raises(ValueError):
        cmd_evaluate(RunConfig(command="evaluate"))


def test_fit_and_reload(tmp_path):
    """Test fitting a model and evaluating it later."""
    simulated = str(tmp_path / "simulated.csv")
    cmd_simulate(RunConfig(command="simulate", output=simulated, n=400))
    model = cmd_fit(RunConfig(command="fit", dataset=simulated))
    model_path = tmp_path / "model.json"
    model.write(model_path)

    config = RunConfig(
        command="evaluate", dataset=simulated, model_path=str(model_path)
    )
    loaded = load_model(config, read_dataset(simulated))
    assert isinstance(loaded, CauseSpecificPH)
    assert np.asarray(loaded.coefficients) == pytest.approx(
        np.asarray(model.coefficients)
    )


def test_unknown_model(tmp_path):
    """Test an unknown model name."""
    path = write_csv(tmp_path, hand_csv)
    with pytest.raises(ValueError):
        cmd_evaluate(RunConfig(command="evaluate", dataset=path, model="weibull"))


def test_simulate(tmp_path):
    """Test that simulated cohorts are deterministic."""
    first, second = str(tmp_path / "first.csv"), str(tmp_path / "second.csv")
    config = cmd_simulate(
        RunConfig(
            command="simulate", output=first, n=250, censoring_rate=0.5, seed=9
        )
    )
    cmd_simulate(
        RunConfig(
            command="simulate", output=second, n=250, censoring_rate=0.5, seed=9
        )
    )
    assert config.rate0 > 0
    assert read_dataset(first) == read_dataset(second)
    assert len(read_dataset(first)) == 250


def test_simulate_requires_output():
    """Test simulate without an output path."""
    with pytest.raises(ValueError):
        cmd_simulate(RunConfig(command="simulate"))


def test_table1_smoke():
    """Test a minimal replicate study."""
    config = RunConfig(
        command="simulate-table1",
        models=[EXP_MODEL],
        censoring_rates=[0.0, 0.5],
        sizes=[300],
        replicates=2,
    )
    report = cmd_simulate_table1(config)

    assert isinstance(report, EfficiencyReport)
    assert len(report.rows) == 2
    for row in report.rows:
        assert row.replicates == 2
        assert row.rmse ** 2 == pytest.approx(row.se ** 2 + row.bias ** 2, abs=1e-10)
        assert row.true_jc == pytest.approx(0.52, abs=0.02)

    with pytest.raises(ValueError):
        cmd_simulate_table1(RunConfig(command="simulate-table1", replicates=1))


def test_table1_efficiency():
    """Test EXP replicate statistics and the shrinking error with n."""
    config = RunConfig(
        command="simulate-table1",
        models=[EXP_MODEL],
        censoring_rates=[0.5, 0.75],
        sizes=[1000, 5000],
        replicates=100,
    )
    report = cmd_simulate_table1(config)
    rows = {(row.censoring_rate, row.n): row for row in report.rows}

    assert rows[(0.5, 1000)].rmse == pytest.approx(0.0179, rel=0.5)
    assert rows[(0.5, 5000)].rmse == pytest.approx(0.0103, rel=0.5)
    for rate in (0.5, 0.75):
        assert rows[(rate, 5000)].median_abs_error < rows[(rate, 1000)].median_abs_error


def test_table2():
    """Test the model comparison on the large cohort."""
    table = cmd_simulate_table2(RunConfig(command="simulate-table2"))
    assert isinstance(table, ComparisonTable)
    assert table.n == 100_000

    rows = {row.model: row for row in table.rows}
    assert rows[EXP_MODEL].joint_concordance == pytest.approx(0.52, abs=0.02)
    assert rows[EXP_MODEL].accuracy == pytest.approx(0.70, abs=0.02)
    assert rows[CSC_MODEL].concordance_per_event == pytest.approx(
        [0.75, 0.60], abs=0.02
    )
    assert rows[CSC_MODEL].accuracy == pytest.approx(0.78, abs=0.02)
    assert rows[CSC_MODEL].joint_concordance == pytest.approx(0.48, abs=0.02)
    assert rows[CSC_MODEL].accuracy > rows[EXP_MODEL].accuracy

    lines = format_text(table).splitlines()
    assert lines[0].split() == ["model", "C1", "C2", "A", "JC", "CC", "A*"]
    assert [line.split()[0] for line in lines[1:]] == [EXP_MODEL, CSC_MODEL]


def test_run_output(tmp_path):
    """Test the output envelope."""
    config = RunConfig(
        command="evaluate", dataset=write_csv(tmp_path, hand_csv), horizon=10.0
    )
    document = json.loads(run_output(config, cmd_evaluate(config)).payload())
    assert document["command"] == "evaluate"
    assert document["result_type"] == "MetricReport"
    assert document["config"]["horizon"] == 10.0
    assert document["result"]["joint_concordance"] == pytest.approx(0.8)


def test_error_report():
    """Test the machine-readable error."""
    report = ErrorReport.from_error(NoEventsOfType(2))
    document = json.loads(report.payload())
    assert document["error"] == "NoEventsOfType"
    assert document["details"] == {"event_type": 2}
    assert document["exit_code"] == 2


def test_rank_variables(tmp_path):
    """Test ranking covariates of a CSV dataset."""
    path = str(tmp_path / "cohort.csv")
    write_dataset(generate_event_specific(EventSpecificConfig(n=600, seed=1)), path)
    comparison = cmd_rank_variables(
        RunConfig(command="rank-variables", dataset=path)
    )

    assert [result.method for result in comparison.results] == [
        "stepwise_cr",
        "stepwise_lumped",
    ]
    for result in comparison.results:
        assert sorted(result.ranking()) == ["x1", "x2", "x3"]

    lines = format_text(comparison).splitlines()
    assert lines[0].split() == ["rank", "stepwise_cr", "stepwise_lumped"]
