from __future__ import annotations

import pytest

from models.program import ProgramSpec
from models.values import Database, Record
from services.benchmark_repository import load_benchmark
from services.solver import SolverSession
from utils.config import SolverConfig


@pytest.fixture(scope="session")
def solver_config() -> SolverConfig:
    config = SolverConfig.from_env()
    if not SolverSession(config).available():
        pytest.skip(f"solver {config.command!r} is not on PATH")
    return config


@pytest.fixture(scope="session")
def new_order_pair() -> ProgramSpec:
    return load_benchmark("new_order_pair").program


@pytest.fixture(scope="session")
def tpcc() -> ProgramSpec:
    return load_benchmark("tpcc").program


@pytest.fixture(scope="session")
def courseware() -> ProgramSpec:
    return load_benchmark("courseware").program


@pytest.fixture(scope="session")
def bank() -> ProgramSpec:
    return load_benchmark("bank").program


@pytest.fixture
def accounts() -> Database:
    return Database.of(
        [
            Record.make("account", id=1, values={"a_id": 1, "a_bal": 10}),
            Record.make("account", id=2, values={"a_id": 2, "a_bal": 0}),
            Record.make("ledger", id=3, values={"l_a_id": 1, "l_amt": 10}),
        ]
    )
