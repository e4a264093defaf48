from __future__ import annotations

import os

import pytest

from models.command import Delete, Insert, Select
from models.errors import ParseError
from services.benchmark_repository import RESOURCES_DIR
from utils.parser import PARAM_RECORD_BASE, parse_file, parse_program
from utils.printer import format_program
from utils.sexpr import Atom, SList, read_all

SMALL = """
; one keyed table and one log
(store MySQL)
(table account (a_id int key) (a_bal int))
(table ledger (l_a_id int) (l_amt int))
(txn pay ((aid int) (legs (set ledger)))
  (select1 acc a account (= a.a_id aid)
    (seq
      (insert (record ledger (l_a_id aid) (l_amt acc.a_bal)))
      (delete l ledger (in-dom l.id legs)))))
(guarantee pay (writes ledger) true)
(database
  (record account (a_id 1) (a_bal 5))
  (record account (id 7) (a_id 2) (a_bal 0))
  (record account (a_id 3) (a_bal 1)))
(run (p1 pay (aid 1) (legs ((record ledger (l_a_id 1) (l_amt 2))))))
(expect mysql (pay rr-snapshot))
"""


def test_reader_keeps_positions():
    (form,) = read_all("(a\n  (b 12) c)")
    assert isinstance(form, SList) and form.head == "a"
    inner = form[1]
    assert (inner.line, inner.column) == (2, 3)
    assert isinstance(inner[1], Atom) and inner[1].is_int


def test_small_program():
    program = parse_program(SMALL, name="small")
    assert program.store == "mysql"
    assert program.tables["account"].key_fields() == ("a_id",)
    assert [record.id for record in program.database.rows()] == [1, 7, 8]
    assert program.guarantees["pay"].writes == ["ledger"]
    assert program.expectations == {"mysql": {"pay": "RR_SNAPSHOT"}}
    (run,) = program.runs
    (leg,) = run.args["legs"]
    assert leg.id == PARAM_RECORD_BASE and leg.table == "ledger"
    body = program.txn("pay").body
    assert isinstance(body, Select) and body.single
    assert isinstance(body.body.first, Insert) and isinstance(body.body.second, Delete)


@pytest.mark.parametrize(
    "text, line, column, message",
    [
        ("(table t (a int))\n(txn x () (delete r t (= q.a 1)))", 2, 26, "unbound variable q"),
        ("(table t (a int)", 1, 1, "unclosed"),
        ("(store postgres))", 1, 17, "unexpected ')'"),
        ('(store "postgres")', 1, 8, "string literals"),
        ("(frobnicate 1)", 1, 1, "unknown top-level form"),
        ("(table t (a int))\n(txn x () (insert (record t (b 1))))", 2, 30, "has no field b"),
        ("(table t (a int))\n(database (record t (id 1) (a 0)) (record t (id 1) (a 1)))", 2, 35, "used twice"),
        ("(table t (a int))\n(txn x ((n int)) skip)\n(run (r1 x))", 3, 6, "does not bind n"),
        ("(table t (a real))", 1, 13, "int or bool"),
    ],
)
def test_errors_point_at_the_source(text, line, column, message):
    with pytest.raises(ParseError) as err:
        parse_program(text, source="prog.sx")
    assert (err.value.line, err.value.column) == (line, column)
    assert message in err.value.message
    assert str(err.value).startswith(f"prog.sx:{line}:{column}: PARSE-ERROR")


def _corpus_files():
    return sorted(name for name in os.listdir(RESOURCES_DIR) if name.endswith(".sx"))


@pytest.mark.parametrize("filename", _corpus_files())
def test_printing_reaches_a_fixpoint(filename):
    program = parse_file(os.path.join(RESOURCES_DIR, filename))
    printed = format_program(program)
    again = parse_program(printed, name=program.name)
    assert format_program(again) == printed
    assert again.transactions == program.transactions
    assert again.database == program.database
