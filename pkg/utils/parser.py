"""Parser from ``.sx`` sources to :class:`ProgramSpec`.

A program file is a sequence of top-level forms: ``store``, ``table``,
``txn``, ``invariant``, ``check``, ``guarantee``, ``database``, ``run`` and
``expect``. Commands and expressions follow the transaction language;
invariants and guarantees are first-order formulas over the states ``D`` and
``D'``.
"""

from __future__ import annotations

import logging
import os
from typing import Any, Callable, Dict, FrozenSet, List, Mapping, Optional, Tuple

from models.command import Command, Delete, Foreach, If, Insert, Let, Select, Skip, Update, seq
from models.errors import ParseError
from models.expr import (
    ARITH_OPS,
    COMPARE_OPS,
    BinOp,
    BoolOp,
    Const,
    Expr,
    Field,
    InDom,
    Ite,
    Not,
    RecordLit,
    SetCall,
    Var,
    With,
)
from models.logic import (
    FALSE,
    TRUE,
    FCmp,
    FEq,
    FHasTable,
    FIff,
    FIn,
    FInProj,
    FIsEmpty,
    Formula,
    FSetEq,
    SBind,
    SEmpty,
    SetExpr,
    SIte,
    SLit,
    SVar,
    TArith,
    TConst,
    Term,
    TField,
    TIte,
    TPick,
    TSetFn,
    TVar,
    TVer,
    conj,
    disj,
    exists,
    forall,
    implies,
    neg,
    rename_state,
    union,
)
from models.program import (
    FieldDecl,
    Guarantee,
    NamedFormula,
    ParamDecl,
    ProgramSpec,
    RunInstance,
    TableDecl,
    TxnDecl,
)
from models.values import HIDDEN_FIELDS, Database, Record
from utils.sexpr import Atom, SExpr, SList, read_all

logger = logging.getLogger(__name__)

STATES = ("D", "D'")
PARAM_RECORD_BASE = 100000
BOOL_WORDS = {"true": True, "false": False}
EXPR_SET_CALLS = {"size": (1, 1), "count": (1, 1), "is_empty": (1, 1), "sum": (2, 2), "max": (1, 2), "min": (1, 2), "project": (2, 2)}
TERM_SET_FUNCTIONS = ("count", "sum", "max", "min")
FIELD_TYPES = ("int", "bool")


def _fail(node: SExpr, message: str, source: str) -> ParseError:
    return ParseError(message, line=node.line, column=node.column, source=source)


class ProgramParser:
    """Single-use parser; call :meth:`parse` once per source text."""

    def __init__(self, source: str = "<input>", name: Optional[str] = None):
        self.source = source
        self.name = name or "program"
        self.store: Optional[str] = None
        self.tables: Dict[str, TableDecl] = {}
        self.transactions: List[TxnDecl] = []
        self.invariants: List[NamedFormula] = []
        self.checks: List[NamedFormula] = []
        self.guarantees: Dict[str, Guarantee] = {}
        self.records: List[Record] = []
        self.runs: List[RunInstance] = []
        self.expectations: Dict[str, Dict[str, str]] = {}
        self._pending_guarantees: List[SList] = []
        self._pending_runs: List[SList] = []
        self._param_ids = PARAM_RECORD_BASE

    def parse(self, text: str) -> ProgramSpec:
        handlers: Dict[str, Callable[[SList], None]] = {
            "store": self._store,
            "table": self._table,
            "txn": self._txn,
            "invariant": lambda form: self.invariants.append(self._named_formula(form)),
            "check": lambda form: self.checks.append(self._named_formula(form)),
            "guarantee": self._pending_guarantees.append,
            "database": self._database,
            "run": self._pending_runs.append,
            "expect": self._expect,
        }
        for form in read_all(text, self.source):
            if not isinstance(form, SList) or form.head not in handlers:
                raise self._error(form, f"unknown top-level form {_head_text(form)!r}")
            handlers[form.head](form)
        # guarantees may use the invariant, runs may use every declared transaction
        for form in self._pending_guarantees:
            self._guarantee(form)
        for form in self._pending_runs:
            self._run(form)
        program = ProgramSpec(
            name=self.name,
            store=self.store,
            tables=self.tables,
            transactions=self.transactions,
            invariants=self.invariants,
            checks=self.checks,
            guarantees=self.guarantees,
            database=Database.of(self.records),
            runs=self.runs,
            expectations=self.expectations,
        )
        logger.debug(
            "parsed %s: %d tables, %d transactions, %d invariants",
            self.name,
            len(self.tables),
            len(self.transactions),
            len(self.invariants),
        )
        return program

    # --- helpers ------------------------------------------------------------

    def _error(self, node: SExpr, message: str) -> ParseError:
        return _fail(node, message, self.source)

    def _atom(self, node: SExpr, what: str) -> str:
        if not isinstance(node, Atom) or node.is_int:
            raise self._error(node, f"expected {what}, found {node}")
        return node.text

    def _list(self, node: SExpr, what: str) -> SList:
        if not isinstance(node, SList):
            raise self._error(node, f"expected {what}, found {node}")
        return node

    def _arity(self, form: SList, low: int, high: Optional[int] = None) -> None:
        count = len(form) - 1
        high = low if high is None else high
        if count < low or (high >= 0 and count > high):
            expected = str(low) if low == high else f"{low}..{'' if high < 0 else high}"
            raise self._error(form, f"{form.head or 'form'} expects {expected} arguments, got {count}")

    def _table_name(self, node: SExpr) -> str:
        name = self._atom(node, "a table name")
        if name not in self.tables:
            raise self._error(node, f"unknown table {name}")
        return name

    def _check_field(self, node: SExpr, table: str, field: str) -> None:
        if field not in self.tables[table].field_names():
            raise self._error(node, f"table {table} has no field {field}")

    # --- declarations -------------------------------------------------------

    def _store(self, form: SList) -> None:
        self._arity(form, 1)
        self.store = self._atom(form[1], "a store name").lower()

    def _table(self, form: SList) -> None:
        self._arity(form, 1, -1)
        name = self._atom(form[1], "a table name")
        if name in self.tables:
            raise self._error(form, f"table {name} declared twice")
        declared: List[FieldDecl] = []
        for item in form.items[2:]:
            spec = self._list(item, "a field declaration (NAME TYPE [key])")
            if len(spec) not in (2, 3):
                raise self._error(spec, "a field declaration is (NAME TYPE) or (NAME TYPE key)")
            field = self._atom(spec[0], "a field name")
            kind = self._atom(spec[1], "a field type")
            if field in HIDDEN_FIELDS:
                raise self._error(spec, f"{field} is a hidden field")
            if kind not in FIELD_TYPES:
                raise self._error(spec[1], f"field type must be int or bool, not {kind}")
            key = len(spec) == 3
            if key and self._atom(spec[2], "key") != "key":
                raise self._error(spec[2], "only the key flag may follow a field type")
            declared.append(FieldDecl(name=field, type=kind, key=key))
        self.tables[name] = TableDecl(name=name, fields=declared)

    def _txn(self, form: SList) -> None:
        self._arity(form, 3)
        name = self._atom(form[1], "a transaction name")
        if any(decl.name == name for decl in self.transactions):
            raise self._error(form, f"transaction {name} declared twice")
        params: List[ParamDecl] = []
        for item in self._list(form[2], "a parameter list"):
            params.append(self._param(item))
        scope = frozenset(param.name for param in params)
        body = self.command(form[3], scope)
        self.transactions.append(TxnDecl(name=name, params=params, body=body))

    def _param(self, node: SExpr) -> ParamDecl:
        spec = self._list(node, "a parameter (NAME KIND)")
        if len(spec) != 2:
            raise self._error(spec, "a parameter is (NAME KIND)")
        name = self._atom(spec[0], "a parameter name")
        kind = spec[1]
        if isinstance(kind, SList):
            if len(kind) != 2 or kind.head != "set":
                raise self._error(kind, "set parameters are written (NAME (set TABLE))")
            return ParamDecl(name=name, kind="set", table=self._table_name(kind[1]))
        word = self._atom(kind, "a parameter kind")
        if word in FIELD_TYPES:
            return ParamDecl(name=name, kind=word)  # type: ignore[arg-type]
        return ParamDecl(name=name, kind="record", table=self._table_name(kind))

    def _named_formula(self, form: SList) -> NamedFormula:
        self._arity(form, 2)
        name = self._atom(form[1], "a name")
        return NamedFormula(name=name, formula=self.formula(form[2], {}))

    def _guarantee(self, form: SList) -> None:
        self._arity(form, 2, 3)
        txn = self._atom(form[1], "a transaction name")
        decl = next((item for item in self.transactions if item.name == txn), None)
        if decl is None:
            raise self._error(form[1], f"guarantee for unknown transaction {txn}")
        writes: Optional[List[str]] = None
        body = form[2]
        if len(form) == 4:
            clause = self._list(form[2], "a (writes TABLE*) clause")
            if clause.head != "writes":
                raise self._error(clause, "the optional guarantee clause is (writes TABLE*)")
            writes = [self._table_name(item) for item in clause.items[1:]]
            body = form[3]
        env = {param.name: _param_sort(param) for param in decl.params}
        self.guarantees[txn] = Guarantee(txn=txn, formula=self.formula(body, env), writes=writes)

    def _database(self, form: SList) -> None:
        used = {record.id for record in self.records}
        for item in form.items[1:]:
            record = self._record_value(item, used)
            used.add(record.id)
            self.records.append(record)

    def _run(self, form: SList) -> None:
        for item in form.items[1:]:
            spec = self._list(item, "a run instance (LABEL TXN (PARAM VALUE)*)")
            if len(spec) < 2:
                raise self._error(spec, "a run instance is (LABEL TXN (PARAM VALUE)*)")
            label = self._atom(spec[0], "an instance label")
            txn = self._atom(spec[1], "a transaction name")
            decl = next((entry for entry in self.transactions if entry.name == txn), None)
            if decl is None:
                raise self._error(spec[1], f"run of unknown transaction {txn}")
            kinds = {param.name: param for param in decl.params}
            args: Dict[str, Any] = {}
            for binding in spec.items[2:]:
                pair = self._list(binding, "an argument (PARAM VALUE)")
                if len(pair) != 2:
                    raise self._error(pair, "an argument is (PARAM VALUE)")
                name = self._atom(pair[0], "a parameter name")
                if name not in kinds:
                    raise self._error(pair[0], f"{txn} has no parameter {name}")
                args[name] = self._argument(pair[1], kinds[name])
            missing = [name for name in kinds if name not in args]
            if missing:
                raise self._error(spec, f"instance {label} does not bind {', '.join(missing)}")
            self.runs.append(RunInstance(instance=label, txn=txn, args=args))

    def _expect(self, form: SList) -> None:
        self._arity(form, 1, -1)
        store = self._atom(form[1], "a store name").lower()
        levels: Dict[str, str] = {}
        for item in form.items[2:]:
            pair = self._list(item, "an expectation (TXN LEVEL)")
            if len(pair) != 2:
                raise self._error(pair, "an expectation is (TXN LEVEL)")
            levels[self._atom(pair[0], "a transaction name")] = self._atom(pair[1], "a level").upper().replace("-", "_")
        self.expectations[store] = levels

    # --- values -------------------------------------------------------------

    def _scalar(self, node: SExpr) -> Any:
        if isinstance(node, Atom):
            if node.is_int:
                return int(node.text)
            if node.text in BOOL_WORDS:
                return BOOL_WORDS[node.text]
        raise self._error(node, f"expected an integer or boolean, found {node}")

    def _record_value(self, node: SExpr, used: Optional[set] = None) -> Record:
        form = self._list(node, "a record (record TABLE (FIELD VALUE)*)")
        if form.head != "record" or len(form) < 2:
            raise self._error(form, "a record is (record TABLE (FIELD VALUE)*)")
        table = self._table_name(form[1])
        values: Dict[str, Any] = {}
        record_id: Optional[int] = None
        for item in form.items[2:]:
            pair = self._list(item, "a field (FIELD VALUE)")
            if len(pair) != 2:
                raise self._error(pair, "a field is (FIELD VALUE)")
            field = self._atom(pair[0], "a field name")
            if field == "id":
                record_id = self._scalar(pair[1])
                continue
            self._check_field(pair[0], table, field)
            values[field] = self._scalar(pair[1])
        missing = [name for name in self.tables[table].field_names() if name not in values]
        if missing:
            raise self._error(form, f"record of {table} lacks {', '.join(missing)}")
        if used is None:
            record_id = self._param_ids
            self._param_ids += 1
        elif record_id is None:
            record_id = max(used, default=0) + 1
        elif record_id in used:
            raise self._error(form, f"record id {record_id} used twice")
        return Record.make(table, id=record_id, values=values)

    def _argument(self, node: SExpr, param: ParamDecl) -> Any:
        if param.kind == "set":
            items = self._list(node, "a record set (RECORD*)")
            records = frozenset(self._record_value(item) for item in items)
            if any(record.table != param.table for record in records):
                raise self._error(node, f"{param.name} holds {param.table} records only")
            return records
        if param.kind == "record":
            return self._record_value(node)
        value = self._scalar(node)
        if isinstance(value, bool) != (param.kind == "bool"):
            raise self._error(node, f"{param.name} expects a {param.kind}")
        return value

    # --- commands -----------------------------------------------------------

    def command(self, node: SExpr, scope: FrozenSet[str]) -> Command:
        if isinstance(node, Atom):
            if node.text == "skip":
                return Skip()
            raise self._error(node, f"expected a command, found {node}")
        head = node.head
        if head == "let":
            self._arity(node, 3)
            name = self._atom(node[1], "a variable")
            return Let(name, self.expr(node[2], scope), self.command(node[3], scope | {name}))
        if head == "if":
            self._arity(node, 3)
            return If(self.expr(node[1], scope), self.command(node[2], scope), self.command(node[3], scope))
        if head == "seq":
            self._arity(node, 1, -1)
            return seq(*(self.command(item, scope) for item in node.items[1:]))
        if head == "insert":
            self._arity(node, 1)
            return Insert(self.expr(node[1], scope))
        if head == "delete":
            self._arity(node, 3)
            var = self._atom(node[1], "a row variable")
            table = self._table_name(node[2])
            return Delete(var, table, self.expr(node[3], scope | {var}))
        if head == "update":
            self._arity(node, 4)
            var = self._atom(node[1], "a row variable")
            table = self._table_name(node[2])
            inner = scope | {var}
            return Update(var, table, self.expr(node[3], inner), self.expr(node[4], inner))
        if head in ("select", "select1"):
            self._arity(node, 5)
            target = self._atom(node[1], "a target variable")
            var = self._atom(node[2], "a row variable")
            table = self._table_name(node[3])
            cond = self.expr(node[4], scope | {var})
            body = self.command(node[5], scope | {target})
            return Select(target, var, table, cond, body, single=head == "select1")
        if head == "foreach":
            self._arity(node, 3)
            vars_ = self._list(node[2], "loop variables (DONE ITEM)")
            if len(vars_) != 2:
                raise self._error(vars_, "loop variables are (DONE ITEM)")
            done = self._atom(vars_[0], "a variable")
            item = self._atom(vars_[1], "a variable")
            return Foreach(self.expr(node[1], scope), done, item, self.command(node[3], scope | {done, item}))
        raise self._error(node, f"unknown command {_head_text(node)!r}")

    # --- expressions --------------------------------------------------------

    def expr(self, node: SExpr, scope: FrozenSet[str]) -> Expr:
        if isinstance(node, Atom):
            if node.is_int:
                return Const(int(node.text))
            if node.text in BOOL_WORDS:
                return Const(BOOL_WORDS[node.text])
            base, _, rest = node.text.partition(".")
            if base not in scope:
                raise self._error(node, f"unbound variable {base}")
            result: Expr = Var(base)
            for name in rest.split(".") if rest else ():
                result = Field(result, name)
            return result
        head = node.head
        args = node.items[1:]
        if head == ".":
            self._arity(node, 2)
            return Field(self.expr(node[1], scope), self._atom(node[2], "a field name"))
        if head == "record":
            self._arity(node, 1, -1)
            table = self._table_name(node[1])
            fields = self._assignments(args[1:], scope, table)
            missing = [name for name in self.tables[table].field_names() if name not in dict(fields)]
            if missing:
                raise self._error(node, f"record of {table} lacks {', '.join(missing)}")
            return RecordLit(table, fields)
        if head == "with":
            self._arity(node, 2, -1)
            return With(self.expr(node[1], scope), self._assignments(args[1:], scope))
        if head in ARITH_OPS or head in COMPARE_OPS:
            self._arity(node, 2)
            return BinOp(head, self.expr(node[1], scope), self.expr(node[2], scope))
        if head in ("and", "or"):
            self._arity(node, 1, -1)
            return BoolOp(head, tuple(self.expr(arg, scope) for arg in args))
        if head == "not":
            self._arity(node, 1)
            return Not(self.expr(node[1], scope))
        if head == "ite":
            self._arity(node, 3)
            return Ite(self.expr(node[1], scope), self.expr(node[2], scope), self.expr(node[3], scope))
        if head == "in-dom":
            self._arity(node, 2, 3)
            field = self._atom(node[3], "a field name") if len(node) == 4 else "id"
            return InDom(self.expr(node[1], scope), self.expr(node[2], scope), field)
        if head in EXPR_SET_CALLS:
            low, high = EXPR_SET_CALLS[head]
            self._arity(node, low, high)
            field = self._atom(node[2], "a field name") if len(node) == 3 else None
            return SetCall(head, self.expr(node[1], scope), field)
        raise self._error(node, f"unknown expression {_head_text(node)!r}")

    def _assignments(self, items, scope: FrozenSet[str], table: Optional[str] = None) -> Tuple[Tuple[str, Expr], ...]:
        out: List[Tuple[str, Expr]] = []
        for item in items:
            pair = self._list(item, "a field assignment (FIELD EXPR)")
            if len(pair) != 2:
                raise self._error(pair, "a field assignment is (FIELD EXPR)")
            name = self._atom(pair[0], "a field name")
            if table is not None:
                self._check_field(pair[0], table, name)
            out.append((name, self.expr(pair[1], scope)))
        return tuple(out)

    # --- formulas -----------------------------------------------------------

    def formula(self, node: SExpr, env: Mapping[str, str]) -> Formula:
        """``env`` maps bound term variables to sorts and set parameters to ``state``."""
        if isinstance(node, Atom):
            if node.text in BOOL_WORDS:
                return TRUE if BOOL_WORDS[node.text] else FALSE
            term = self.term(node, env)
            return FEq(term, TConst(True))
        head = node.head
        args = node.items[1:]
        if head == "and":
            return conj(*(self.formula(arg, env) for arg in args))
        if head == "or":
            return disj(*(self.formula(arg, env) for arg in args))
        if head == "not":
            self._arity(node, 1)
            return neg(self.formula(node[1], env))
        if head == "=>":
            self._arity(node, 2)
            return implies(self.formula(node[1], env), self.formula(node[2], env))
        if head == "<=>":
            self._arity(node, 2)
            return FIff(self.formula(node[1], env), self.formula(node[2], env))
        if head in ("forall", "exists"):
            self._arity(node, 2)
            variables, guards, inner = self._binders(node[1], env)
            body = self.formula(node[2], inner)
            if head == "forall":
                return forall(variables, implies(conj(*guards), body))
            return exists(variables, conj(*guards, body))
        if head == "=":
            self._arity(node, 2)
            return FEq(self.term(node[1], env), self.term(node[2], env))
        if head == "!=":
            self._arity(node, 2)
            return neg(FEq(self.term(node[1], env), self.term(node[2], env)))
        if head in ("<", "<=", ">", ">="):
            self._arity(node, 2)
            return FCmp(head, self.term(node[1], env), self.term(node[2], env))
        if head == "in":
            self._arity(node, 2)
            return FIn(self.term(node[1], env), self.set_expr(node[2], env))
        if head == "in-dom":
            self._arity(node, 2, 3)
            field = self._atom(node[3], "a field name") if len(node) == 4 else "id"
            return FInProj(self.term(node[1], env), self.set_expr(node[2], env), field)
        if head == "is_empty":
            self._arity(node, 1)
            return FIsEmpty(self.set_expr(node[1], env))
        if head == "set=":
            self._arity(node, 2)
            return FSetEq(self.set_expr(node[1], env), self.set_expr(node[2], env))
        if head == "tagged":
            self._arity(node, 2)
            return FHasTable(self.term(node[1], env), self._table_name(node[2]))
        if head == "preserves-invariant":
            self._arity(node, 0)
            if not self.invariants:
                raise self._error(node, "preserves-invariant needs at least one invariant")
            invariant = conj(*(item.formula for item in self.invariants))
            return implies(invariant, rename_state(invariant, "D", "D'"))  # type: ignore[arg-type]
        raise self._error(node, f"unknown formula {_head_text(node)!r}")

    def _binders(self, node: SExpr, env: Mapping[str, str]) -> Tuple[Tuple[TVar, ...], List[Formula], Dict[str, str]]:
        variables: List[TVar] = []
        guards: List[Formula] = []
        inner = dict(env)
        for item in self._list(node, "a binder list ((VAR TABLE STATE)*)"):
            spec = self._list(item, "a binder (VAR TABLE STATE)")
            if len(spec) not in (2, 3):
                raise self._error(spec, "a binder is (VAR TABLE STATE) or (VAR SORT)")
            name = self._atom(spec[0], "a variable")
            kind = self._atom(spec[1], "a table or sort")
            if len(spec) == 2:
                if kind not in FIELD_TYPES + ("rec",):
                    raise self._error(spec[1], "a two-part binder names the sort int, bool or rec")
                variables.append(TVar(name, kind))
                inner[name] = kind
                continue
            table = self._table_name(spec[1])
            var = TVar(name, "rec")
            variables.append(var)
            guards.append(FIn(var, self.set_expr(spec[2], env)))
            guards.append(FHasTable(var, table))
            inner[name] = "rec"
        return tuple(variables), guards, inner

    def term(self, node: SExpr, env: Mapping[str, str]) -> Term:
        if isinstance(node, Atom):
            if node.is_int:
                return TConst(int(node.text))
            if node.text in BOOL_WORDS:
                return TConst(BOOL_WORDS[node.text])
            base, _, rest = node.text.partition(".")
            sort = env.get(base)
            if sort is None or sort == "state":
                raise self._error(node, f"unbound term variable {base}")
            result: Term = TVar(base, sort)
            for name in rest.split(".") if rest else ():
                result = TField(result, name)
            return result
        head = node.head
        if head == ".":
            self._arity(node, 2)
            return TField(self.term(node[1], env), self._atom(node[2], "a field name"))
        if head in ARITH_OPS:
            self._arity(node, 2)
            return TArith(head, self.term(node[1], env), self.term(node[2], env))
        if head == "ite":
            self._arity(node, 3)
            return TIte(self.formula(node[1], env), self.term(node[2], env), self.term(node[3], env))
        if head == "ver":
            self._arity(node, 1)
            return TVer(TVar(self._state_name(node[1], env), "state"))
        if head == "pick":
            self._arity(node, 1)
            return TPick(self.set_expr(node[1], env))
        if head == "size":
            self._arity(node, 1)
            return TSetFn("size", self.set_expr(node[1], env))
        if head in TERM_SET_FUNCTIONS:
            return self._set_function(node, env)
        raise self._error(node, f"unknown term {_head_text(node)!r}")

    def _set_function(self, node: SList, env: Mapping[str, str]) -> Term:
        """``(count (V TABLE STATE) COND)`` and ``(sum|max|min (V TABLE STATE) COND FIELD)``."""
        wants_field = node.head != "count"
        self._arity(node, 3 if wants_field else 2)
        variables, guards, inner = self._binders(SList((node[1],), node[1].line, node[1].column), env)
        if len(guards) != 2:
            raise self._error(node[1], "set functions bind one (VAR TABLE STATE)")
        var = variables[0]
        body = conj(*guards, self.formula(node[2], inner))
        field = self._atom(node[3], "a field name") if wants_field else None
        return TSetFn(node.head, SLit(var, body), field)

    def _state_name(self, node: SExpr, env: Mapping[str, str]) -> str:
        name = self._atom(node, "a state")
        if name not in STATES and env.get(name) != "state":
            raise self._error(node, f"unknown state {name}")
        return name

    def set_expr(self, node: SExpr, env: Mapping[str, str]) -> SetExpr:
        if isinstance(node, Atom):
            return SVar(self._state_name(node, env))
        head = node.head
        if head == "empty":
            self._arity(node, 0)
            return SEmpty()
        if head == "table":
            self._arity(node, 2)
            state = SVar(self._state_name(node[1], env))
            table = self._table_name(node[2])
            var = TVar("r", "rec")
            return SLit(var, conj(FIn(var, state), FHasTable(var, table)))
        if head == "lit":
            self._arity(node, 2)
            name = self._single_var(node[1])
            return SLit(TVar(name, "rec"), self.formula(node[2], {**env, name: "rec"}))
        if head == "bind":
            self._arity(node, 3)
            name = self._single_var(node[2])
            source = self.set_expr(node[1], env)
            return SBind(source, TVar(name, "rec"), self.set_expr(node[3], {**env, name: "rec"}))
        if head == "ite":
            self._arity(node, 3)
            return SIte(self.formula(node[1], env), self.set_expr(node[2], env), self.set_expr(node[3], env))
        if head == "union":
            self._arity(node, 2)
            return union(self.set_expr(node[1], env), self.set_expr(node[2], env))
        raise self._error(node, f"unknown set expression {_head_text(node)!r}")

    def _single_var(self, node: SExpr) -> str:
        form = self._list(node, "a variable in parentheses")
        if len(form) != 1:
            raise self._error(form, "expected exactly one variable")
        return self._atom(form[0], "a variable")


def _head_text(node: SExpr) -> str:
    if isinstance(node, Atom):
        return node.text
    return node.head or str(node)


def _param_sort(param: ParamDecl) -> str:
    if param.kind == "set":
        return "state"
    if param.kind == "record":
        return "rec"
    return param.kind


def parse_program(text: str, *, source: str = "<input>", name: Optional[str] = None) -> ProgramSpec:
    """Parse a whole ``.sx`` program."""
    return ProgramParser(source, name).parse(text)


def parse_file(path: str, *, name: Optional[str] = None) -> ProgramSpec:
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    stem = os.path.splitext(os.path.basename(path))[0]
    return parse_program(text, source=path, name=name or stem)
