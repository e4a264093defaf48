from __future__ import annotations

import pytest

from models.errors import UnknownBenchmarkError
from services.benchmark_repository import BenchmarkRepository, benchmark_names, load_benchmark
from services.explorer import explore_program, program_conditions
from utils.config import ExplorerOptions


def test_corpus_lists_every_benchmark():
    assert set(benchmark_names()) == {"bank", "courseware", "empty", "new_order_pair", "tpcc"}


def test_unknown_benchmark():
    with pytest.raises(UnknownBenchmarkError):
        load_benchmark("tpce")


def test_repository_caches_programs():
    repository = BenchmarkRepository()
    assert repository.load("bank") is repository.load("bank")


@pytest.mark.parametrize("name", ["bank", "courseware", "new_order_pair", "tpcc"])
def test_initial_database_satisfies_conditions(name):
    program = load_benchmark(name).program
    for condition, check in program_conditions(program).items():
        assert check(program.database), condition


def test_expectations_cover_both_stores():
    expected = load_benchmark("tpcc").expected
    assert expected["mysql"] == {
        "new_order": "SER",
        "delivery": "SER",
        "payment": "RC",
        "order_status": "RC",
        "stock_level": "RC",
    }
    assert expected["postgres"]["new_order"] == "SI"
    assert expected["postgres"]["delivery"] == "SI"


def test_courseware_guarantees_name_their_tables():
    guarantees = load_benchmark("courseware").program.guarantees
    assert "student" not in guarantees["enroll"].writes
    assert guarantees["register"].writes == ["student"]


def _explore_cases():
    cases = []
    for name in benchmark_names():
        for expectation in load_benchmark(name).explore:
            cases.append(pytest.param(name, expectation, id=f"{name}-{'-'.join(expectation.levels.values())}"))
    return cases


@pytest.mark.parametrize("name, expectation", _explore_cases())
def test_manifest_explore_verdicts(name, expectation):
    program = load_benchmark(name).program
    levels = {key: level.upper().replace("-", "_") for key, level in expectation.levels.items()}
    verdict = explore_program(program, levels, options=ExplorerOptions(bound=expectation.bound))
    assert verdict.kind == expectation.verdict
