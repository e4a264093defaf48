from __future__ import annotations

import pytest

from models.errors import EvalError
from models.expr import BinOp, BoolOp, Const, Field, InDom, Ite, Not, RecordLit, SetCall, Var, With, eval_expr, free_vars, substitute
from models.values import INT_MAX, INT_MIN, Record

ROW = Record.make("account", id=5, txn=1, values={"a_id": 2, "a_bal": 7})
ROWS = frozenset({ROW, Record.make("account", id=6, values={"a_id": 3, "a_bal": 1})})


def test_arithmetic_wraps():
    assert eval_expr(BinOp("+", Const(INT_MAX), Const(1)), {}) == INT_MIN
    assert eval_expr(BinOp("-", Const(INT_MIN), Const(1)), {}) == INT_MAX


def test_field_access_and_with():
    env = {"r": ROW}
    assert eval_expr(Field(Var("r"), "a_bal"), env) == 7
    assert eval_expr(Field(Var("r"), "id"), env) == 5
    updated = eval_expr(With(Var("r"), (("a_bal", BinOp("+", Field(Var("r"), "a_bal"), Const(1))),)), env)
    assert updated.get("a_bal") == 8
    assert updated.id == ROW.id


def test_with_cannot_write_hidden_or_missing_fields():
    with pytest.raises(EvalError) as err:
        eval_expr(With(Var("r"), (("id", Const(9)),)), {"r": ROW})
    assert err.value.code == "MISSING-FIELD"
    with pytest.raises(EvalError):
        eval_expr(With(Var("r"), (("nope", Const(9)),)), {"r": ROW})


def test_record_literal_has_placeholder_id():
    value = eval_expr(RecordLit("ledger", (("l_a_id", Const(1)), ("l_amt", Const(4)))), {})
    assert value.table == "ledger" and value.id == 0 and value.get("l_amt") == 4


def test_set_calls():
    env = {"s": ROWS}
    assert eval_expr(SetCall("size", Var("s")), env) == 2
    assert eval_expr(SetCall("sum", Var("s"), "a_bal"), env) == 8
    assert eval_expr(SetCall("max", Var("s"), "a_bal"), env) == 7
    assert eval_expr(SetCall("is_empty", Const(frozenset())), {}) is True
    assert eval_expr(SetCall("sum", Const(frozenset()), "a_bal"), {}) == 0
    with pytest.raises(EvalError) as err:
        eval_expr(SetCall("min", Const(frozenset()), "a_bal"), {})
    assert err.value.code == "EMPTY-SET"


def test_in_dom_by_id_and_field():
    env = {"s": ROWS}
    assert eval_expr(InDom(Const(6), Var("s")), env)
    assert not eval_expr(InDom(Const(2), Var("s")), env)
    assert eval_expr(InDom(Const(2), Var("s"), "a_id"), env)


def test_boolean_connectives_and_type_errors():
    assert eval_expr(BoolOp("and", (Const(True), Not(Const(False)))), {})
    assert eval_expr(Ite(Const(False), Const(1), Const(2)), {}) == 2
    with pytest.raises(EvalError) as err:
        eval_expr(BinOp("<", Const(True), Const(1)), {})
    assert err.value.code == "TYPE-MISMATCH"
    with pytest.raises(EvalError) as err:
        eval_expr(Var("ghost"), {})
    assert err.value.code == "UNBOUND-VARIABLE"


@pytest.mark.parametrize("op", ["=", "!="])
def test_equality_does_not_mix_booleans_and_integers(op):
    with pytest.raises(EvalError) as err:
        eval_expr(BinOp(op, Const(1), Const(True)), {})
    assert err.value.code == "TYPE-MISMATCH"
    assert eval_expr(BinOp(op, Const(True), Const(True)), {}) is (op == "=")
    assert eval_expr(BinOp(op, Const(0), Const(1)), {}) is (op == "!=")


def test_substitute_closes_free_variables():
    expr = BinOp("+", Field(Var("r"), "a_bal"), Var("amt"))
    assert free_vars(expr) == {"r", "amt"}
    closed = substitute(substitute(expr, "r", ROW), "amt", 3)
    assert free_vars(closed) == frozenset()
    assert eval_expr(closed, {}) == 10
