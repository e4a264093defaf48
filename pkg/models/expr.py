from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, Mapping, Optional, Tuple

from models.errors import EvalError
from models.values import HIDDEN_FIELDS, Record, wrap_int

ARITH_OPS = ("+", "-")
COMPARE_OPS = ("<=", ">=", "<", ">", "=", "!=")
SET_FUNCTIONS = ("size", "count", "is_empty", "sum", "max", "min", "project")


class Expr:
    """Base class of the expression language."""


@dataclass(frozen=True)
class Const(Expr):
    value: Any

    def __str__(self) -> str:
        if isinstance(self.value, bool):
            return "true" if self.value else "false"
        if isinstance(self.value, frozenset):
            return "(" + " ".join(sorted(str(item) for item in self.value)) + ")"
        return str(self.value)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Field(Expr):
    base: Expr
    name: str

    def __str__(self) -> str:
        if isinstance(self.base, Var):
            return f"{self.base.name}.{self.name}"
        return f"(. {self.base} {self.name})"


@dataclass(frozen=True)
class RecordLit(Expr):
    table: str
    fields: Tuple[Tuple[str, Expr], ...]

    def __str__(self) -> str:
        body = "".join(f" ({name} {value})" for name, value in self.fields)
        return f"(record {self.table}{body})"


@dataclass(frozen=True)
class With(Expr):
    base: Expr
    updates: Tuple[Tuple[str, Expr], ...]

    def __str__(self) -> str:
        body = "".join(f" ({name} {value})" for name, value in self.updates)
        return f"(with {self.base}{body})"


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def __str__(self) -> str:
        return f"({self.op} {self.left} {self.right})"


@dataclass(frozen=True)
class BoolOp(Expr):
    op: str
    args: Tuple[Expr, ...]

    def __str__(self) -> str:
        return f"({self.op} " + " ".join(str(arg) for arg in self.args) + ")"


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr

    def __str__(self) -> str:
        return f"(not {self.arg})"


@dataclass(frozen=True)
class Ite(Expr):
    cond: Expr
    then: Expr
    else_: Expr

    def __str__(self) -> str:
        return f"(ite {self.cond} {self.then} {self.else_})"


@dataclass(frozen=True)
class InDom(Expr):
    """``value`` is among the ``field`` projections of a record set (ids by default)."""

    value: Expr
    source: Expr
    field: str = "id"

    def __str__(self) -> str:
        if self.field == "id":
            return f"(in-dom {self.value} {self.source})"
        return f"(in-dom {self.value} {self.source} {self.field})"


@dataclass(frozen=True)
class SetCall(Expr):
    fn: str
    arg: Expr
    field: Optional[str] = None

    def __str__(self) -> str:
        if self.field is None:
            return f"({self.fn} {self.arg})"
        return f"({self.fn} {self.arg} {self.field})"


# --- evaluation -------------------------------------------------------------


def _expect_int(value: Any, expr: Expr) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise EvalError(f"expected an integer in {expr}, got {value!r}", code="TYPE-MISMATCH")
    return value


def _expect_bool(value: Any, expr: Expr) -> bool:
    if not isinstance(value, bool):
        raise EvalError(f"expected a boolean in {expr}, got {value!r}", code="TYPE-MISMATCH")
    return value


def _expect_record(value: Any, expr: Expr) -> Record:
    if not isinstance(value, Record):
        raise EvalError(f"expected a record in {expr}, got {value!r}", code="TYPE-MISMATCH")
    return value


def _expect_set(value: Any, expr: Expr) -> FrozenSet[Any]:
    if not isinstance(value, frozenset):
        raise EvalError(f"expected a set in {expr}, got {value!r}", code="TYPE-MISMATCH")
    return value


def _project(items: FrozenSet[Any], field: Optional[str], expr: Expr) -> list:
    if field is None:
        return [_expect_int(item, expr) if not isinstance(item, Record) else item for item in items]
    out = []
    for item in items:
        record = _expect_record(item, expr)
        if not record.has(field):
            raise EvalError(f"record {record} has no field {field} in {expr}", code="MISSING-FIELD")
        out.append(record.get(field))
    return out


def eval_set_call(fn: str, items: FrozenSet[Any], field: Optional[str], expr: Expr) -> Any:
    if fn in ("size", "count"):
        return len(items)
    if fn == "is_empty":
        return not items
    if fn == "project":
        return frozenset(_project(items, field, expr))
    values = [_expect_int(value, expr) for value in _project(items, field, expr)]
    if fn == "sum":
        return wrap_int(sum(values))
    if not values:
        raise EvalError(f"{fn} of an empty set in {expr}", code="EMPTY-SET")
    return max(values) if fn == "max" else min(values)


def eval_expr(expr: Expr, env: Mapping[str, Any]) -> Any:
    """Evaluate a closed expression; integers wrap at the fixed width."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        if expr.name not in env:
            raise EvalError(f"unbound variable {expr.name}", code="UNBOUND-VARIABLE")
        return env[expr.name]
    if isinstance(expr, Field):
        record = _expect_record(eval_expr(expr.base, env), expr)
        if not record.has(expr.name):
            raise EvalError(f"record {record} has no field {expr.name} in {expr}", code="MISSING-FIELD")
        return record.get(expr.name)
    if isinstance(expr, RecordLit):
        values = {name: eval_expr(value, env) for name, value in expr.fields}
        return Record.make(expr.table, id=0, values=values)
    if isinstance(expr, With):
        record = _expect_record(eval_expr(expr.base, env), expr)
        updates: Dict[str, Any] = {}
        for name, value in expr.updates:
            if name in HIDDEN_FIELDS or not record.has(name):
                raise EvalError(f"record {record} has no writable field {name} in {expr}", code="MISSING-FIELD")
            updates[name] = eval_expr(value, env)
        return record.replace(values=updates)
    if isinstance(expr, BinOp):
        left = eval_expr(expr.left, env)
        right = eval_expr(expr.right, env)
        if expr.op in ("=", "!="):
            if type(left) is not type(right):
                raise EvalError(f"cannot compare {left!r} with {right!r} in {expr}", code="TYPE-MISMATCH")
            return (left == right) == (expr.op == "=")
        lhs, rhs = _expect_int(left, expr), _expect_int(right, expr)
        if expr.op == "+":
            return wrap_int(lhs + rhs)
        if expr.op == "-":
            return wrap_int(lhs - rhs)
        if expr.op == "<=":
            return lhs <= rhs
        if expr.op == ">=":
            return lhs >= rhs
        if expr.op == "<":
            return lhs < rhs
        if expr.op == ">":
            return lhs > rhs
        raise EvalError(f"unknown operator {expr.op}", code="TYPE-MISMATCH")
    if isinstance(expr, BoolOp):
        if expr.op == "and":
            return all(_expect_bool(eval_expr(arg, env), expr) for arg in expr.args)
        return any(_expect_bool(eval_expr(arg, env), expr) for arg in expr.args)
    if isinstance(expr, Not):
        return not _expect_bool(eval_expr(expr.arg, env), expr)
    if isinstance(expr, Ite):
        if _expect_bool(eval_expr(expr.cond, env), expr):
            return eval_expr(expr.then, env)
        return eval_expr(expr.else_, env)
    if isinstance(expr, InDom):
        value = eval_expr(expr.value, env)
        items = _expect_set(eval_expr(expr.source, env), expr)
        return value in _project(items, expr.field, expr)
    if isinstance(expr, SetCall):
        items = _expect_set(eval_expr(expr.arg, env), expr)
        return eval_set_call(expr.fn, items, expr.field, expr)
    raise EvalError(f"cannot evaluate {expr!r}", code="TYPE-MISMATCH")


def free_vars(expr: Expr) -> FrozenSet[str]:
    if isinstance(expr, Var):
        return frozenset({expr.name})
    if isinstance(expr, Const):
        return frozenset()
    if isinstance(expr, Field):
        return free_vars(expr.base)
    if isinstance(expr, RecordLit):
        return frozenset().union(*(free_vars(value) for _, value in expr.fields))
    if isinstance(expr, With):
        return free_vars(expr.base).union(*(free_vars(value) for _, value in expr.updates))
    if isinstance(expr, BinOp):
        return free_vars(expr.left) | free_vars(expr.right)
    if isinstance(expr, BoolOp):
        return frozenset().union(*(free_vars(arg) for arg in expr.args))
    if isinstance(expr, Not):
        return free_vars(expr.arg)
    if isinstance(expr, Ite):
        return free_vars(expr.cond) | free_vars(expr.then) | free_vars(expr.else_)
    if isinstance(expr, InDom):
        return free_vars(expr.value) | free_vars(expr.source)
    if isinstance(expr, SetCall):
        return free_vars(expr.arg)
    raise TypeError(f"not an expression: {expr!r}")


def substitute(expr: Expr, name: str, value: Any) -> Expr:
    """Replace free occurrences of ``name`` by the constant ``value``."""
    if isinstance(expr, Var):
        return Const(value) if expr.name == name else expr
    if isinstance(expr, Const):
        return expr
    if isinstance(expr, Field):
        return Field(substitute(expr.base, name, value), expr.name)
    if isinstance(expr, RecordLit):
        return RecordLit(expr.table, tuple((key, substitute(item, name, value)) for key, item in expr.fields))
    if isinstance(expr, With):
        return With(
            substitute(expr.base, name, value),
            tuple((key, substitute(item, name, value)) for key, item in expr.updates),
        )
    if isinstance(expr, BinOp):
        return BinOp(expr.op, substitute(expr.left, name, value), substitute(expr.right, name, value))
    if isinstance(expr, BoolOp):
        return BoolOp(expr.op, tuple(substitute(arg, name, value) for arg in expr.args))
    if isinstance(expr, Not):
        return Not(substitute(expr.arg, name, value))
    if isinstance(expr, Ite):
        return Ite(
            substitute(expr.cond, name, value),
            substitute(expr.then, name, value),
            substitute(expr.else_, name, value),
        )
    if isinstance(expr, InDom):
        return InDom(substitute(expr.value, name, value), substitute(expr.source, name, value), expr.field)
    if isinstance(expr, SetCall):
        return SetCall(expr.fn, substitute(expr.arg, name, value), expr.field)
    raise TypeError(f"not an expression: {expr!r}")
