from __future__ import annotations

import os

import pytest
from click.testing import CliRunner

from main import EXIT_FAILED, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, cli
from services.benchmark_repository import RESOURCES_DIR


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def test_explore_reports_the_read_committed_anomaly(runner):
    result = runner.invoke(cli, ["explore", "new_order_pair", "--levels", "all=rc"])
    assert result.exit_code == EXIT_FAILED
    assert "verdict=violation" in result.output
    assert "failed=order_unique" in result.output


def test_explore_is_clean_when_serializable(runner):
    result = runner.invoke(cli, ["explore", "new_order_pair", "--levels", "all=ser"])
    assert result.exit_code == EXIT_OK
    assert result.output.startswith("verdict=ok")


def test_explore_rejects_unknown_levels(runner):
    result = runner.invoke(cli, ["explore", "new_order_pair", "--levels", "all=snapshot"])
    assert result.exit_code == EXIT_USAGE


def test_verify_without_transactions_succeeds(runner):
    result = runner.invoke(cli, ["verify", os.path.join(RESOURCES_DIR, "empty.sx"), "--levels", "()"])
    assert result.exit_code == EXIT_OK


def test_parse_errors_exit_with_usage(runner, tmp_path):
    path = tmp_path / "broken.sx"
    path.write_text("(table t (a int)\n")
    result = runner.invoke(cli, ["explore", str(path)])
    assert result.exit_code == EXIT_USAGE
    assert "PARSE-ERROR" in result.output


def test_missing_solver(runner, monkeypatch):
    monkeypatch.delenv("ACIDIFY_SOLVER_CMD", raising=False)
    result = runner.invoke(cli, ["--solver-cmd", "no-such-solver-binary -in", "verify", "bank", "--levels", "all=ser"])
    assert result.exit_code == EXIT_SOLVER


def test_benchmarks_lists_the_corpus(runner):
    result = runner.invoke(cli, ["benchmarks"])
    assert result.exit_code == EXIT_OK
    names = [line.split("\t")[0] for line in result.output.splitlines()]
    assert names == sorted(names) and "tpcc" in names


def test_fmt_prints_a_parseable_program(runner, tmp_path):
    result = runner.invoke(cli, ["fmt", "bank"])
    assert result.exit_code == EXIT_OK
    path = tmp_path / "bank.sx"
    path.write_text(result.output)
    again = runner.invoke(cli, ["fmt", str(path)])
    assert again.output == result.output
