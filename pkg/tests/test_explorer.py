from __future__ import annotations

import itertools
import random

import pytest

from models.command import Delete, Foreach, Insert, Par, Select, Skip, Txn, TxnRun, Update, seq
from models.errors import EvalError, LocalContextViolation
from models.expr import BinOp, Const, Field, RecordLit, SetCall, Var, With
from models.values import Database, Record, flush
from services.explorer import (
    IdSource,
    LocalConfig,
    TopConfig,
    explore,
    explore_program,
    final_states,
    initial_config,
    level_for,
    local_step,
    run_alone,
    run_serial,
    top_step,
    workload,
)
from utils.config import ExplorerOptions
from utils.parser import parse_program

COUNTER = """
(table cell (k int key) (v int))
(txn bump () (select1 c x cell (= x.k 1) (update y cell (with y (v (+ c.v 1))) (= y.k 1))))
(txn reset () (update y cell (with y (v 10)) (= y.k 1)))
(invariant small (forall ((c cell D)) (< c.v 100)))
(database (record cell (id 1) (k 1) (v 0)))
(run (b bump) (r reset))
"""

MISSING_ROW = """
(table cell (k int) (v int))
(txn read_missing () (select1 c x cell (= x.k 9) skip))
(run (m read_missing))
"""


def _values(states) -> set:
    return {tuple(sorted(record.get("v") for record in state.records)) for state in states}


def test_read_committed_anomaly_reads_before_commits(new_order_pair):
    verdict = explore_program(new_order_pair, {"all": "RC"}, options=ExplorerOptions(bound=40))
    assert verdict.kind == "violation"
    assert verdict.failed_invariant == "order_unique"
    steps = verdict.trace.steps
    selects = [step for step in steps if step.rule == "E-Select"]
    commits = [step for step in steps if step.rule == "E-Commit"]
    assert {step.actor for step in selects} == {"no1", "no2"}
    assert [step.actor for step in commits] in (["commit(no1)", "commit(no2)"], ["commit(no2)", "commit(no1)"])
    assert max(step.step for step in selects) < min(step.step for step in commits)


@pytest.mark.parametrize("level", ["SER", "SI"])
def test_new_order_pair_is_safe_under_snapshots(new_order_pair, level):
    verdict = explore_program(new_order_pair, {"all": level}, options=ExplorerOptions(bound=40))
    assert verdict.kind == "ok"
    assert verdict.trace is None


@pytest.mark.parametrize("level", ["SER", "SI"])
def test_conflicting_writers_reach_only_serial_outcomes(level):
    program = parse_program(COUNTER)
    branches = workload(program, {"all": level}).branches
    finals = final_states(Par(branches), program.database)
    serial = {run_serial(list(order), program.database) for order in itertools.permutations(branches)}
    assert _values(finals) == {(10,), (11,)}
    assert {state.records for state in finals} == {state.records for state in serial}


def test_read_committed_loses_an_update():
    program = parse_program(COUNTER)
    finals = final_states(workload(program, {"all": "RC"}), program.database)
    assert _values(finals) == {(1,), (10,), (11,)}


def test_empty_select1_is_an_error_verdict():
    program = parse_program(MISSING_ROW)
    verdict = explore_program(program, {})
    assert verdict.kind == "error"
    assert "EMPTY-SELECT1" in verdict.error


def test_small_bound_is_reported_as_exhausted():
    program = parse_program(COUNTER)
    verdict = explore_program(program, {"all": "RC"}, options=ExplorerOptions(bound=2))
    assert verdict.kind == "bound-exhausted"


def test_level_for_prefers_instance_then_transaction():
    levels = {"all": "RC", "bump": "SI", "b2": "SER"}
    assert level_for(levels, "bump", "b2") == "SER"
    assert level_for(levels, "bump", "b1") == "SI"
    assert level_for(levels, "reset", "r") == "RC"
    assert level_for({}, "reset") == "SER"


def test_serial_run_of_one_transaction_is_a_flush(accounts):
    body = Update(
        "a",
        "account",
        With(Var("a"), (("a_bal", BinOp("+", Field(Var("a"), "a_bal"), Const(5))),)),
        BinOp("=", Field(Var("a"), "a_id"), Const(2)),
    )
    local = run_alone(body, 1, accounts)
    assert flush(local, accounts).records == run_serial([body], accounts).records
    assert run_serial([body], accounts).version == accounts.version + 1


def test_blocked_transaction_takes_no_step():
    row = Record.make("account", id=1, values={"a_id": 1, "a_bal": 10})
    snapshot = Database.of([row])
    current = Database.of([], version=1)
    body = Select("xs", "a", "account", Const(True), Skip())
    for level, delta in (("RR_ANSI", Database.of([row])), ("SER", Database())):
        blocked = TxnRun(1, "t", level, body, delta, snapshot)
        assert top_step(TopConfig((blocked,), current, 10)) == []
    free = TxnRun(1, "t", "RC", body, Database(), snapshot)
    (move,) = top_step(TopConfig((free,), current, 10))
    assert move.rule == "E-Select"
    assert move.config.branches[0].snapshot == current


@pytest.mark.parametrize("level", ["RR_SNAPSHOT", "SI", "SER"])
def test_running_transactions_read_an_unchanged_snapshot(level):
    program = parse_program(COUNTER)
    start = initial_config(workload(program, {"all": level}), program.database)
    frontier, seen, local_moves = [start], {start}, 0
    while frontier:
        cfg = frontier.pop()
        for move in top_step(cfg):
            if move.rule not in ("E-Txn-Start", "E-Commit"):
                local_moves += 1
                assert move.config.delta == cfg.delta
                for before, after in zip(cfg.branches, move.config.branches):
                    if before != after:
                        assert after.snapshot == before.snapshot == cfg.delta
            if move.config not in seen:
                seen.add(move.config)
                frontier.append(move.config)
    assert local_moves > 0


def test_rewriting_own_uncommitted_records_is_rejected(accounts):
    bump = Update(
        "a",
        "account",
        With(Var("a"), (("a_bal", Const(1)),)),
        BinOp("=", Field(Var("a"), "a_id"), Const(1)),
    )
    with pytest.raises(LocalContextViolation):
        run_alone(seq(bump, bump), 1, accounts)


def test_all_orders_enumerates_foreach_iterations():
    loop = LocalConfig(1, Foreach(Const(frozenset({1, 2})), "done", "item", Skip()), Database())
    ((started, rule),) = local_step(Database(), loop, IdSource(1))
    assert rule == "E-Foreach1"
    assert len(local_step(Database(), started, IdSource(1))) == 1
    assert len(local_step(Database(), started, IdSource(1), ExplorerOptions(all_orders=True))) == 2


def test_track_reads_keeps_selected_records(accounts):
    body = Select("xs", "a", "account", BinOp("=", Field(Var("a"), "a_id"), Const(1)), Skip())
    assert run_alone(body, 1, accounts) == Database()
    tracked = run_alone(body, 1, accounts, options=ExplorerOptions(track_reads=True))
    assert {record.id for record in tracked.records} == {1}


def test_reads_own_writes_sees_local_inserts():
    body = seq(
        Insert(RecordLit("cell", (("k", Const(3)), ("v", Const(1))))),
        Select("c", "x", "cell", BinOp("=", Field(Var("x"), "k"), Const(3)), Skip(), single=True),
    )
    with pytest.raises(EvalError) as err:
        run_alone(body, 1, Database())
    assert err.value.code == "EMPTY-SELECT1"
    local = run_alone(body, 1, Database(), options=ExplorerOptions(reads_own_writes=True))
    assert [record.get("v") for record in local.records] == [1]


# --- serializable refinement over random programs ---------------------------


def _key(value: int):
    return BinOp("=", Field(Var("y"), "k"), Const(value))


def _random_op(rng: random.Random, index: int, written: int):
    kind = rng.choice(("add", "copy", "insert", "delete"))
    if kind == "add":
        bumped = With(Var("y"), (("v", BinOp("+", Field(Var("y"), "v"), Const(rng.randint(1, 3)))),))
        return Update("y", "cell", bumped, _key(written))
    if kind == "copy":
        target = f"s{index}"
        copied = With(Var("y"), (("v", BinOp("+", SetCall("sum", Var(target), "v"), Const(1))),))
        read = BinOp("=", Field(Var("x"), "k"), Const(rng.randint(1, 3)))
        return Select(target, "x", "cell", read, Update("y", "cell", copied, _key(written)))
    if kind == "insert":
        return Insert(RecordLit("cell", (("k", Const(written)), ("v", Const(rng.randint(0, 3))))))
    return Delete("y", "cell", _key(written))


def _random_program(rng: random.Random) -> Par:
    branches = []
    for txn_id in range(1, rng.randint(2, 3) + 1):
        # a transaction never rewrites its own uncommitted records
        keys = rng.sample((1, 2, 3), rng.randint(1, 3))
        ops = [_random_op(rng, index, key) for index, key in enumerate(keys)]
        branches.append(Txn(txn_id, f"t{txn_id}", "SER", seq(*ops)))
    return Par(tuple(branches))


CELLS = Database.of([Record.make("cell", id=i, values={"k": i, "v": 0}) for i in (1, 2, 3)])


def test_serializable_finals_equal_serial_finals():
    rng = random.Random(20)
    for _ in range(20):
        program = _random_program(rng)
        finals = final_states(program, CELLS, options=ExplorerOptions(bound=60))
        serial = {run_serial(list(order), CELLS).records for order in itertools.permutations(program.branches)}
        assert {state.records for state in finals} == serial, program


def test_explore_checks_invariants_after_commits():
    program = parse_program(COUNTER)
    verdict = explore(
        workload(program, {"all": "SER"}),
        program.database,
        invariants={"never_ten": lambda state: all(record.get("v") != 10 for record in state.records)},
    )
    assert verdict.kind == "violation"
    assert verdict.failed_invariant == "never_ten"
    assert verdict.trace.steps[-1].rule == "E-Commit"
