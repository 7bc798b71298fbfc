"""Tests for jointconcordance.cli"""
import json
import logging
import typing

import pytest

from jointconcordance.__main__ import get_args, run
from jointconcordance.cli import coerce_value, load_config_file, resolve_config

hand_csv = "id,time,event,x\na,1,1,2.0\nb,2,2,0.0\nc,3,1,-1.0\n"


def write_file(tmp_path, name, text):
    """Write a file and return its path."""
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_load_config_file(tmp_path):
    """Test key=value parsing."""
    path = write_file(
        tmp_path,
        "study.conf",
        "# Table I\n\ncensoring_rates = 0.25, 0.5\nn-large=100000  # truth\n",
    )
    assert load_config_file(path) == {
        "censoring_rates": "0.25, 0.5",
        "n_large": "100000",
    }


def test_bad_config_line(tmp_path):
    """Test a line without '='."""
    path = write_file(tmp_path, "bad.conf", "replicates 100\n")
    with pytest.raises(ValueError):
        load_config_file(path)


def test_coerce_value():
    """Test conversion to field types."""
    assert coerce_value(int, "5") == 5
    assert coerce_value(float, "1e-8") == 1e-8
    assert coerce_value(typing.List[int], "500,1000") == [500, 1000]
    assert coerce_value(typing.List[str], "exp, csc") == ["exp", "csc"]
    assert coerce_value(typing.Optional[float], "null") is None
    assert coerce_value(typing.Optional[float], "2.5") == 2.5
    assert coerce_value(bool, "off") is False
    assert coerce_value(int, 7) == 7

    with pytest.raises(ValueError):
        coerce_value(bool, "maybe")

    with pytest.raises(ValueError):
        coerce_value(int, "many")


def test_resolve_precedence(tmp_path, caplog):
    """Test defaults < config file < flags."""
    path = write_file(
        tmp_path,
        "study.conf",
        "replicates = 20\nsizes = 500, 1000\nseed = 3\nplot = yes\n",
    )
    args = get_args(["simulate-table1", "--config", path, "--seed", "11"])
    with caplog.at_level(logging.WARNING):
        config = resolve_config(args)

    assert config.command == "simulate-table1"
    assert config.replicates == 20
    assert config.sizes == [500, 1000]
    assert config.seed == 11
    assert config.quantile == 0.75
    assert "plot" in caplog.text


def test_flags():
    """Test flag parsing for evaluate."""
    config = resolve_config(
        get_args(
            [
                "evaluate",
                "cohort.csv",
                "--model",
                "csc",
                "--horizon",
                "2.5",
                "--tie-credit",
                "--bootstrap",
                "200",
            ]
        )
    )
    assert config.dataset == "cohort.csv"
    assert config.model == "csc"
    assert config.horizon == 2.5
    assert config.tie_credit
    assert config.bootstrap == 200
    assert not config.exclude_censored_comparators


def test_run_evaluate(tmp_path, capsys):
    """Test a successful run."""
    path = write_file(tmp_path, "hand.csv", hand_csv)
    assert run(["evaluate", path, "--horizon", "10"]) == 0

    document = json.loads(capsys.readouterr().out)
    assert document["result"]["joint_concordance"] == pytest.approx(0.8)
    assert document["config"]["dataset"] == path


def test_run_output_file(tmp_path, capsys):
    """Test writing the report to a file as text."""
    path = write_file(tmp_path, "hand.csv", hand_csv)
    output = tmp_path / "report.txt"
    assert (
        run(
            [
                "evaluate",
                path,
                "--horizon",
                "10",
                "--format",
                "text",
                "--output",
                str(output),
            ]
        )
        == 0
    )
    assert capsys.readouterr().out == ""
    assert output.read_text().splitlines()[1].split()[:2] == [
        "joint_concordance",
        "0.8000",
    ]


def test_run_data_error(tmp_path, capsys):
    """Test the exit code of a data error."""
    path = write_file(tmp_path, "censored.csv", "id,time,event,x\na,1,0,1\nb,2,0,0\n")
    assert run(["evaluate", path]) == 2

    document = json.loads(capsys.readouterr().out)
    assert document["error"] == "NoEventsOfType"


def test_run_usage_error(capsys):
    """Test the exit code of a usage error."""
    assert run(["evaluate"]) == 1
    assert json.loads(capsys.readouterr().out)["error"] == "UsageError"

    assert run(["evaluate", "cohort.csv", "--seed", "many"]) == 1


def test_run_bad_flag():
    """Test that argument errors exit with the usage code."""
    with pytest.raises(SystemExit) as error:
        run(["evaluate", "--model", "weibull"])

    assert error.value.code == 1
