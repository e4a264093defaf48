"""Pretty printer producing ``.sx`` text the parser reads back unchanged."""

from __future__ import annotations

from typing import Any, List, Optional, Sequence, Tuple

from models.command import Command, Delete, Foreach, If, Insert, Let, Select, Seq, Skip, Update
from models.expr import Expr
from models.logic import (
    FAnd,
    FCmp,
    FConst,
    FEq,
    FExists,
    FForall,
    FHasTable,
    FIff,
    FImplies,
    FIn,
    FInProj,
    FIsEmpty,
    FNot,
    FOr,
    Formula,
    FSetEq,
    SBind,
    SEmpty,
    SetExpr,
    SIte,
    SLit,
    SUnion,
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
)
from models.program import ParamDecl, ProgramSpec
from models.values import Record

INDENT = "  "


def format_scalar(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def format_record(record: Record, *, with_id: bool = True) -> str:
    head = f"(record {record.table}"
    if with_id:
        head += f" (id {record.id})"
    return head + "".join(f" ({name} {format_scalar(value)})" for name, value in record.fields) + ")"


def format_value(value: Any) -> str:
    if isinstance(value, frozenset):
        items = sorted(value, key=lambda record: record.id)
        return "(" + " ".join(format_record(item, with_id=False) for item in items) + ")"
    if isinstance(value, Record):
        return format_record(value, with_id=False)
    return format_scalar(value)


def format_expr(expr: Expr) -> str:
    return str(expr)


# --- commands ---------------------------------------------------------------


def format_command(command: Command, depth: int = 0) -> str:
    pad = INDENT * depth
    if isinstance(command, Skip):
        return pad + "skip"
    if isinstance(command, Insert):
        return f"{pad}(insert {format_expr(command.value)})"
    if isinstance(command, Delete):
        return f"{pad}(delete {command.var} {command.table} {format_expr(command.cond)})"
    if isinstance(command, Update):
        return f"{pad}(update {command.var} {command.table} {format_expr(command.value)} {format_expr(command.cond)})"
    if isinstance(command, Let):
        return f"{pad}(let {command.name} {format_expr(command.value)}\n{format_command(command.body, depth + 1)})"
    if isinstance(command, If):
        return (
            f"{pad}(if {format_expr(command.cond)}\n"
            f"{format_command(command.then, depth + 1)}\n"
            f"{format_command(command.else_, depth + 1)})"
        )
    if isinstance(command, Seq):
        parts = []
        while isinstance(command, Seq):
            parts.append(command.first)
            command = command.second
        parts.append(command)
        inner = "\n".join(format_command(part, depth + 1) for part in parts)
        return f"{pad}(seq\n{inner})"
    if isinstance(command, Select):
        head = "select1" if command.single else "select"
        return (
            f"{pad}({head} {command.target} {command.var} {command.table} {format_expr(command.cond)}\n"
            f"{format_command(command.body, depth + 1)})"
        )
    if isinstance(command, Foreach):
        return (
            f"{pad}(foreach {format_expr(command.source)} ({command.done_var} {command.item_var})\n"
            f"{format_command(command.body, depth + 1)})"
        )
    raise TypeError(f"no surface syntax for {command!r}")


# --- logic ------------------------------------------------------------------


def format_term(term: Term) -> str:
    if isinstance(term, TConst):
        return format_scalar(term.value)
    if isinstance(term, TVar):
        return term.name
    if isinstance(term, TField):
        if _dotted(term.base):
            return f"{format_term(term.base)}.{term.name}"
        return f"(. {format_term(term.base)} {term.name})"
    if isinstance(term, TArith):
        return f"({term.op} {format_term(term.left)} {format_term(term.right)})"
    if isinstance(term, TIte):
        return f"(ite {format_formula(term.cond)} {format_term(term.then)} {format_term(term.else_)})"
    if isinstance(term, TVer):
        return f"(ver {format_term(term.state)})"
    if isinstance(term, TPick):
        return f"(pick {format_set(term.source)})"
    if isinstance(term, TSetFn):
        return _format_set_function(term)
    raise TypeError(f"no surface syntax for {term!r}")


def _dotted(term: Term) -> bool:
    while isinstance(term, TField):
        term = term.base
    return isinstance(term, TVar)


def _format_set_function(term: TSetFn) -> str:
    source = term.source
    if term.fn != "size" and isinstance(source, SLit):
        guards = _guards(source.body, (source.var,))
        if guards is not None:
            binders, rest = guards
            cond = _conjunction(rest)
            suffix = f" {term.field}" if term.field else ""
            return f"({term.fn} {binders[0]} {format_formula(cond)}{suffix})"
    if term.fn == "size" and term.field is None:
        return f"(size {format_set(source)})"
    raise TypeError(f"no surface syntax for {term!r}")


def _args(formula: Formula) -> Tuple[Formula, ...]:
    return formula.args if isinstance(formula, FAnd) else (formula,)


def _conjunction(items: Sequence[Formula]) -> Formula:
    if not items:
        return FConst(True)
    return items[0] if len(items) == 1 else FAnd(tuple(items))


def _guards(body: Formula, variables: Sequence[TVar]) -> Optional[Tuple[List[str], List[Formula]]]:
    """Split ``(in v S) (tagged v T)`` guard pairs off the front of a conjunction."""
    items = list(_args(body))
    binders: List[str] = []
    for position, var in enumerate(variables):
        if var.sort != "rec" or len(items) < 2 * (position + 1):
            return None
        member, tag = items[2 * position], items[2 * position + 1]
        if not (isinstance(member, FIn) and member.elem == var and isinstance(tag, FHasTable) and tag.elem == var):
            return None
        binders.append(f"({var.name} {tag.table} {format_set(member.source)})")
    return binders, items[2 * len(variables) :]


def _format_quantifier(formula: Formula) -> str:
    head = "forall" if isinstance(formula, FForall) else "exists"
    variables = formula.vars  # type: ignore[attr-defined]
    body = formula.body  # type: ignore[attr-defined]
    if head == "forall" and isinstance(body, FImplies):
        split = _guards(body.left, variables)
        if split is not None and not split[1]:
            return f"(forall ({' '.join(split[0])}) {format_formula(body.right)})"
    if head == "exists":
        split = _guards(body, variables)
        if split is not None:
            return f"(exists ({' '.join(split[0])}) {format_formula(_conjunction(split[1]))})"
    plain = " ".join(f"({var.name} {var.sort})" for var in variables)
    return f"({head} ({plain}) {format_formula(body)})"


def format_formula(formula: Formula) -> str:
    if isinstance(formula, FConst):
        return "true" if formula.value else "false"
    if isinstance(formula, FAnd):
        return "(and " + " ".join(format_formula(arg) for arg in formula.args) + ")"
    if isinstance(formula, FOr):
        return "(or " + " ".join(format_formula(arg) for arg in formula.args) + ")"
    if isinstance(formula, FNot):
        return f"(not {format_formula(formula.arg)})"
    if isinstance(formula, FImplies):
        return f"(=> {format_formula(formula.left)} {format_formula(formula.right)})"
    if isinstance(formula, FIff):
        return f"(<=> {format_formula(formula.left)} {format_formula(formula.right)})"
    if isinstance(formula, (FForall, FExists)):
        return _format_quantifier(formula)
    if isinstance(formula, FEq):
        return f"(= {format_term(formula.left)} {format_term(formula.right)})"
    if isinstance(formula, FCmp):
        return f"({formula.op} {format_term(formula.left)} {format_term(formula.right)})"
    if isinstance(formula, FIn):
        return f"(in {format_term(formula.elem)} {format_set(formula.source)})"
    if isinstance(formula, FInProj):
        suffix = "" if formula.field == "id" else f" {formula.field}"
        return f"(in-dom {format_term(formula.value)} {format_set(formula.source)}{suffix})"
    if isinstance(formula, FIsEmpty):
        return f"(is_empty {format_set(formula.source)})"
    if isinstance(formula, FSetEq):
        return f"(set= {format_set(formula.left)} {format_set(formula.right)})"
    if isinstance(formula, FHasTable):
        return f"(tagged {format_term(formula.elem)} {formula.table})"
    raise TypeError(f"no surface syntax for {formula!r}")


def format_set(source: SetExpr) -> str:
    if isinstance(source, SVar):
        return source.name
    if isinstance(source, SEmpty):
        return "(empty)"
    if isinstance(source, SLit):
        items = _args(source.body)
        if (
            source.var.name == "r"
            and len(items) == 2
            and isinstance(items[0], FIn)
            and items[0].elem == source.var
            and isinstance(items[0].source, SVar)
            and isinstance(items[1], FHasTable)
            and items[1].elem == source.var
        ):
            return f"(table {items[0].source.name} {items[1].table})"
        return f"(lit ({source.var.name}) {format_formula(source.body)})"
    if isinstance(source, SBind):
        return f"(bind {format_set(source.source)} ({source.var.name}) {format_set(source.body)})"
    if isinstance(source, SIte):
        return f"(ite {format_formula(source.cond)} {format_set(source.then)} {format_set(source.else_)})"
    if isinstance(source, SUnion):
        return f"(union {format_set(source.left)} {format_set(source.right)})"
    raise TypeError(f"no surface syntax for {source!r}")


# --- programs ---------------------------------------------------------------


def _format_param(param: ParamDecl) -> str:
    if param.kind == "set":
        return f"({param.name} (set {param.table}))"
    if param.kind == "record":
        return f"({param.name} {param.table})"
    return f"({param.name} {param.kind})"


def format_program(program: ProgramSpec) -> str:
    """The whole program in declaration order: store, tables, transactions, conditions, fixtures."""
    out: List[str] = []
    if program.store:
        out.append(f"(store {program.store})")
    for table in program.tables.values():
        fields = "".join(f" ({item.name} {item.type}{' key' if item.key else ''})" for item in table.fields)
        out.append(f"(table {table.name}{fields})")
    for decl in program.transactions:
        params = " ".join(_format_param(param) for param in decl.params)
        out.append(f"(txn {decl.name} ({params})\n{format_command(decl.body, 1)})")
    for item in program.invariants:
        out.append(f"(invariant {item.name}\n{INDENT}{format_formula(item.formula)})")
    for item in program.checks:
        out.append(f"(check {item.name}\n{INDENT}{format_formula(item.formula)})")
    for guarantee in program.guarantees.values():
        writes = f" (writes {' '.join(guarantee.writes)})" if guarantee.writes is not None else ""
        out.append(f"(guarantee {guarantee.txn}{writes}\n{INDENT}{format_formula(guarantee.formula)})")
    if program.database.records:
        rows = "\n".join(INDENT + format_record(record) for record in program.database.rows())
        out.append(f"(database\n{rows})")
    if program.runs:
        lines = []
        for run in program.runs:
            args = "".join(f" ({name} {format_value(value)})" for name, value in run.args.items())
            lines.append(f"{INDENT}({run.instance} {run.txn}{args})")
        out.append("(run\n" + "\n".join(lines) + ")")
    for store, levels in program.expectations.items():
        pairs = "".join(f" ({txn} {level})" for txn, level in levels.items())
        out.append(f"(expect {store}{pairs})")
    return "\n\n".join(out) + "\n"
