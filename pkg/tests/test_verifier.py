from __future__ import annotations

import pytest

from models.command import Par, Select, Txn, Update, bind_params, walk
from models.expr import InDom
from models.program import Guarantee
from models.logic import FEq, SVar, TConst, TSetFn, TVar, exists, forall
from services.verifier import (
    Verifier,
    guarantee_holds_on_run,
    infer_program_levels,
    rewrite_update_for_store,
    serializable_guarantees,
    set_function_axioms,
    unfaithful_guarantees,
    verify_program,
)
from services.benchmark_repository import load_benchmark
from services.explorer import final_states, run_alone
from utils.parser import parse_program


def _updates(command):
    return [node for node in walk(command) if isinstance(node, Update)]


def test_postgres_read_committed_update_reads_its_targets_first(bank):
    body = bank.txn("deposit").body
    rewritten = rewrite_update_for_store(body, "postgres", "RC")
    guards = [node for node in walk(rewritten) if isinstance(node, Select)]
    assert len(guards) == 1
    (update,) = _updates(rewritten)
    assert any(isinstance(arg, InDom) for arg in update.cond.args)
    assert guards[0].body == update


@pytest.mark.parametrize("level", ["RC", "RR_SNAPSHOT", "SI", "SER"])
def test_postgres_update_reads_its_targets_first_at_every_level(bank, level):
    rewritten = rewrite_update_for_store(bank.txn("deposit").body, "postgres", level)
    (guard,) = [node for node in walk(rewritten) if isinstance(node, Select)]
    (update,) = _updates(rewritten)
    assert guard.body == update


@pytest.mark.parametrize("store", ["mysql", None])
def test_update_is_kept_outside_postgres(bank, store):
    body = bank.txn("deposit").body
    assert rewrite_update_for_store(body, store, "RC") is body


@pytest.mark.parametrize("name", ["deposit", "withdraw"])
def test_split_update_reaches_the_same_final_states(bank, name):
    args = (("aid", 1), ("amt", 5))
    original = bank.txn(name).body
    rewritten = rewrite_update_for_store(original, "postgres", "RC")
    twice = rewrite_update_for_store(rewritten, "postgres", "SER")

    def finals(body):
        pair = Par((Txn(1, "t1", "RC", bind_params(body, args)), Txn(2, "t2", "RC", bind_params(body, args))))
        return final_states(pair, bank.database)

    assert run_alone(bind_params(rewritten, args), 1, bank.database) == run_alone(bind_params(original, args), 1, bank.database)
    assert finals(rewritten) == finals(original) == finals(twice)


def test_set_functions_get_axioms():
    assert len(set_function_axioms(FEq(TSetFn("count", SVar("D"), None), TConst(0)))) == 1
    assert len(set_function_axioms(FEq(TSetFn("max", SVar("D"), "a_bal"), TConst(0)))) == 2
    assert not set_function_axioms(FEq(TVar("n", "int"), TConst(0)))


def test_serializable_guarantees_cover_every_transaction(courseware):
    guarantees = serializable_guarantees(courseware)
    assert sorted(guarantees) == sorted(courseware.txn_names())
    assert all(item.writes is None for item in guarantees.values())


@pytest.mark.parametrize("name", ["tpcc", "courseware", "new_order_pair", "bank"])
def test_declared_guarantees_hold_on_lone_runs(name):
    assert unfaithful_guarantees(load_benchmark(name).program) == []


def test_derived_guarantees_hold_on_lone_runs(bank):
    assert unfaithful_guarantees(bank, serializable_guarantees(bank)) == []


def test_lone_run_can_break_a_false_guarantee(bank):
    never = Guarantee(txn="deposit", formula=FEq(TConst(1), TConst(2)))
    assert not guarantee_holds_on_run(bank, "deposit", {"aid": 2, "amt": 5}, never)


def test_empty_program_verifies_vacuously():
    program = parse_program("(store postgres)")
    assert verify_program(program) == []
    report = infer_program_levels(program)
    assert report.ok and report.levels == {}


class _AlwaysUnsat:
    def available(self) -> bool:
        return True

    def check(self, text, label=None, sidecar=None) -> str:
        return "unsat"


def test_gks_violations_surface_in_prover_stats(bank):
    a, b, c, d = (TVar(name) for name in "abcd")
    verifier = Verifier(bank, store="postgres")
    verifier.prover.session = _AlwaysUnsat()
    verifier.prover.satisfiable([forall((a, b, c), exists((d,), FEq(a, d)))], label="outside")
    assert verifier.prover.stats.gks_violations == 1


@pytest.mark.parametrize("name", ["bank", "tpcc"])
@pytest.mark.parametrize("level", ["RC", "SER"])
def test_benchmark_queries_stay_in_the_decidable_fragment(name, level):
    program = load_benchmark(name).program
    verifier = Verifier(program, store="postgres")
    verifier.prover.session = _AlwaysUnsat()
    for decl in program.transactions:
        result = verifier.verify_txn(decl, level)
        assert result.gks_violations == 0, result.line()
    assert verifier.prover.stats.queries > 0
    assert verifier.prover.stats.gks_violations == 0


# --- solver-backed -----------------------------------------------------------


@pytest.mark.solver
def test_read_only_transaction_verifies_at_read_committed(tpcc, solver_config):
    verifier = Verifier(tpcc, store="postgres", config=solver_config)
    result = verifier.verify_txn(tpcc.txn("order_status"), "RC")
    assert result.verified, result.line()
    assert [stage.stage for stage in result.stages][0] == "spec-stability"


@pytest.mark.solver
def test_withdraw_fails_at_read_committed(bank, solver_config):
    result = Verifier(bank, store="postgres", config=solver_config).verify_txn(bank.txn("withdraw"), "RC")
    assert not result.verified
    assert result.failed_stage is not None


@pytest.mark.solver
@pytest.mark.slow
@pytest.mark.parametrize("store", ["postgres", "mysql"])
def test_tpcc_levels(tpcc, solver_config, store):
    report = infer_program_levels(tpcc, store=store, config=solver_config)
    assert report.ok, report.render()
    assert report.levels == tpcc.expectations[store]


@pytest.mark.solver
@pytest.mark.slow
@pytest.mark.parametrize("store", ["postgres", "mysql"])
def test_courseware_levels(courseware, solver_config, store):
    report = infer_program_levels(courseware, store=store, config=solver_config)
    assert report.levels == {"register": "RC", "add_course": "RC", "enroll": "SER", "deregister": "SER"}


@pytest.mark.solver
def test_weakened_withdraw_stays_in_the_decidable_fragment(bank, solver_config):
    verifier = Verifier(bank, store="postgres", config=solver_config)
    result = verifier.verify_txn(bank.txn("withdraw"), "RC")
    assert result.gks_violations == 0
    assert verifier.prover.stats.gks_violations == 0
