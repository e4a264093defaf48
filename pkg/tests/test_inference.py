from __future__ import annotations

import pytest

from models.errors import NestedBindDepthError, UnsupportedCommandError
from models.logic import FHasTable, FIn, SExists, SLit, SVar, TRUE, TVar, bind_nesting, conj
from services.benchmark_repository import load_benchmark
from services.inference import (
    InferenceContext,
    check_against_interpreter,
    infer,
    serial_context,
    stability_shortcut,
    stabilize,
)
from services.isolation_specs import ATOMS, ConstrainedRely, Rely, RelyDisjunct
from utils.parser import parse_program

NESTED = """
(table item_req (ol_i_id int) (ol_qty int))
(table stock (s_i_id int) (s_qty int))
(txn restock ((xs (set item_req)) (ys (set item_req)))
  (foreach xs (d1 a)
    (foreach ys (d2 b)
      (update s stock (with s (s_qty (+ s.s_qty b.ol_qty))) (= s.s_i_id a.ol_i_id)))))
(txn peek ((xs (set item_req)))
  (foreach xs (done it) (if (is_empty done) skip skip)))
"""

ACCOUNT = TVar("acc")
READS_ACCOUNT = SLit(ACCOUNT, conj(FIn(ACCOUNT, SVar("D")), FHasTable(ACCOUNT, "account")))


def _instances():
    for name in ("bank", "courseware", "new_order_pair"):
        for run in load_benchmark(name).program.runs:
            yield name, run.instance


@pytest.mark.parametrize("benchmark, instance", list(_instances()))
def test_serial_transformer_agrees_with_interpreter(benchmark, instance):
    program = load_benchmark(benchmark).program
    run = next(item for item in program.runs if item.instance == instance)
    agree, expected, actual = check_against_interpreter(program.txn(run.txn), program, run.args, program.database)
    assert agree, (expected, actual)


def test_withdraw_transformer_writes_once(bank, accounts):
    decl = bank.txn("withdraw")
    agree, expected, _ = check_against_interpreter(decl, bank, {"aid": 1, "amt": 4}, accounts)
    assert agree
    (written,) = expected
    assert written.get("a_bal") == 6 and written.id == 1


def test_overdraft_writes_nothing(bank, accounts):
    agree, expected, actual = check_against_interpreter(bank.txn("withdraw"), bank, {"aid": 2, "amt": 1}, accounts)
    assert agree and not expected and not actual


def test_one_nested_bind_is_allowed(new_order_pair):
    decl = new_order_pair.txn("new_order")
    transformer = infer(decl.body, serial_context(decl, new_order_pair))
    assert bind_nesting(transformer.body) == 1


def test_deeper_nesting_is_rejected_unless_allowed():
    program = parse_program(NESTED)
    decl = program.txn("restock")
    with pytest.raises(NestedBindDepthError):
        infer(decl.body, serial_context(decl, program))
    rely = serial_context(decl, program).rely
    deep = InferenceContext.for_txn(decl, program, rely, allow_deep=True)
    assert bind_nesting(infer(decl.body, deep).body) == 2


def test_loop_body_may_not_read_the_iterated_prefix():
    program = parse_program(NESTED)
    decl = program.txn("peek")
    with pytest.raises(UnsupportedCommandError):
        infer(decl.body, serial_context(decl, program))


def _context(writes):
    disjunct = RelyDisjunct("other", TRUE, writes, ("account", "ledger"))
    return InferenceContext(txn_id=1, txn_name="reader", rely=ConstrainedRely(Rely((disjunct,)), ATOMS["true"]))


def test_footprint_shortcut_when_nobody_writes_the_table():
    ctx = _context(("ledger",))
    assert stability_shortcut(READS_ACCOUNT, ctx) == "footprint"
    assert stabilize(READS_ACCOUNT, ctx) == READS_ACCOUNT
    assert ctx.stats.fast_paths["footprint"] == 1


def test_unproved_stability_weakens_to_an_invariant_witness():
    ctx = _context(("account",))
    assert stability_shortcut(READS_ACCOUNT, ctx) is None
    weakened = stabilize(READS_ACCOUNT, ctx)
    assert isinstance(weakened, SExists)
    assert ctx.stats.weakened == 1


def test_snapshot_isolation_needs_no_stability_check(bank):
    decl = bank.txn("deposit")
    ctx = InferenceContext.for_txn(decl, bank, ConstrainedRely(Rely(), ATOMS["ss"]))
    assert stability_shortcut(READS_ACCOUNT, ctx) == "identity"
