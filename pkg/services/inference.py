"""Syntax-directed inference of state transformers.

A transformer ``λD. s`` describes the records a transaction body adds to
its local database when run against snapshot ``D``. SQL commands yield
point transformers which are then stabilized against the rely: a
transformer that interference cannot change is kept, anything else is
weakened to ``exists(D', I(D'), s[D'/D])``.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

from models.command import Command, Delete, Foreach, If, Insert, Let, Select, Seq, Skip, Update, bind_params, walk
from models.errors import NestedBindDepthError, UnsupportedCommandError
from models.expr import BinOp, BoolOp, Const, Expr, Field, InDom, Ite, Not, RecordLit, SetCall, Var, With
from models.expr import free_vars as expr_free_vars
from models.ground import eval_setexpr, universe_of
from models.logic import (
    FALSE,
    FCmp,
    FEq,
    FHasTable,
    FIn,
    FInProj,
    FIsEmpty,
    FRecordIs,
    FSetEq,
    Formula,
    SBind,
    SEmpty,
    SetExpr,
    SExists,
    SIte,
    SLit,
    SVar,
    TArith,
    TConst,
    Term,
    TField,
    TFresh,
    TIte,
    TPick,
    TRUE,
    TSetFn,
    TVar,
    Transformer,
    bind_nesting,
    conj,
    disj,
    fresh_name,
    mentions,
    neg,
    read_tables,
    rename_state,
    subst,
    union,
)
from models.program import ProgramSpec, TxnDecl
from models.values import Database, Record
from services.explorer import run_alone
from services.isolation_specs import ATOMS, ConstrainedRely, Rely, rely_modulo

logger = logging.getLogger(__name__)

STATE = "D"


@dataclass(frozen=True)
class Shape:
    """A record value known field by field, before it is stored anywhere."""

    table: Optional[str]
    fields: Tuple[Tuple[str, Term], ...]

    def get(self, name: str) -> Term:
        for key, value in self.fields:
            if key == name:
                return value
        raise UnsupportedCommandError(f"record of {self.table} has no field {name}")


Value = Union[Term, Formula, SetExpr, Shape]


@dataclass
class InferenceStats:
    fast_paths: Counter = field(default_factory=Counter)
    stability_queries: int = 0
    weakened: int = 0
    _sites: Any = field(default_factory=lambda: itertools.count(1))

    def next_site(self, txn: str) -> str:
        return f"{txn}.ins{next(self._sites)}"


@dataclass(frozen=True)
class InferenceContext:
    """Everything the inference rules consult besides the command itself."""

    txn_id: int
    txn_name: str
    rely: ConstrainedRely
    invariant: Formula = TRUE
    context: SetExpr = SEmpty()
    schema: Mapping[str, Tuple[str, ...]] = field(default_factory=dict)
    env: Mapping[str, Value] = field(default_factory=dict)
    nu: Tuple[TVar, ...] = ()
    prover: Any = None
    allow_deep: bool = False
    stats: InferenceStats = field(default_factory=InferenceStats)

    def bind(self, name: str, value: Value) -> "InferenceContext":
        env = dict(self.env)
        env[name] = value
        return dataclasses.replace(self, env=env)

    def extended(self, added: SetExpr) -> "InferenceContext":
        return dataclasses.replace(self, context=union(self.context, added))

    @classmethod
    def for_txn(
        cls,
        decl: TxnDecl,
        program: ProgramSpec,
        rely: ConstrainedRely,
        *,
        prover=None,
        allow_deep: bool = False,
        invariant: Optional[Formula] = None,
    ) -> "InferenceContext":
        env: Dict[str, Value] = {}
        for param in decl.params:
            if param.kind == "set":
                env[param.name] = SVar(param.name)
            elif param.kind == "record":
                env[param.name] = TVar(param.name, "rec")
            else:
                env[param.name] = TVar(param.name, param.kind)
        return cls(
            txn_id=program.txn_id(decl.name),
            txn_name=decl.name,
            rely=rely,
            invariant=program.invariant() if invariant is None else invariant,
            schema={name: tuple(program.table_fields(name)) for name in program.table_names()},
            env=env,
            prover=prover,
            allow_deep=allow_deep,
        )


# --- expressions ------------------------------------------------------------


def _value(expr: Expr, ctx: InferenceContext) -> Value:
    if isinstance(expr, Var):
        if expr.name not in ctx.env:
            raise UnsupportedCommandError(f"unbound variable {expr.name}")
        return ctx.env[expr.name]
    if isinstance(expr, Const):
        if isinstance(expr.value, (bool, int)):
            return TConst(expr.value)
        raise UnsupportedCommandError(f"constant {expr} has no symbolic form")
    if isinstance(expr, RecordLit):
        return Shape(expr.table, tuple((name, _term(value, ctx)) for name, value in expr.fields))
    if isinstance(expr, With):
        base = _value(expr.base, ctx)
        updates = {name: _term(value, ctx) for name, value in expr.updates}
        if isinstance(base, Shape):
            return Shape(base.table, tuple((name, updates.get(name, value)) for name, value in base.fields))
        if isinstance(base, TVar) and base.sort == "rec":
            raise UnsupportedCommandError(f"cannot tell the fields of {expr.base} in {expr}")
        raise UnsupportedCommandError(f"{expr.base} is not a record in {expr}")
    if isinstance(expr, Field):
        base = _value(expr.base, ctx)
        if isinstance(base, Shape):
            return base.get(expr.name)
        if isinstance(base, Term):
            return TField(base, expr.name)
        raise UnsupportedCommandError(f"{expr.base} is not a record in {expr}")
    if isinstance(expr, BinOp):
        if expr.op in ("+", "-"):
            return TArith(expr.op, _term(expr.left, ctx), _term(expr.right, ctx))
        left, right = _term(expr.left, ctx), _term(expr.right, ctx)
        if expr.op == "=":
            return FEq(left, right)
        if expr.op == "!=":
            return neg(FEq(left, right))
        return FCmp(expr.op, left, right)
    if isinstance(expr, BoolOp):
        parts = [_formula(arg, ctx) for arg in expr.args]
        return conj(*parts) if expr.op == "and" else disj(*parts)
    if isinstance(expr, Not):
        return neg(_formula(expr.arg, ctx))
    if isinstance(expr, Ite):
        cond = _formula(expr.cond, ctx)
        then, else_ = _value(expr.then, ctx), _value(expr.else_, ctx)
        if isinstance(then, Formula) or isinstance(else_, Formula):
            then_f, else_f = _as_formula(then), _as_formula(else_)
            return disj(conj(cond, then_f), conj(neg(cond), else_f))
        if isinstance(then, SetExpr) and isinstance(else_, SetExpr):
            return SIte(cond, then, else_)
        return TIte(cond, _as_term(then), _as_term(else_))
    if isinstance(expr, InDom):
        value = _term(expr.value, ctx)
        if isinstance(expr.source, SetCall) and expr.source.fn == "project":
            return FInProj(value, _set(expr.source.arg, ctx), expr.source.field or "id")
        return FInProj(value, _set(expr.source, ctx), expr.field)
    if isinstance(expr, SetCall):
        source = _set(expr.arg, ctx)
        if expr.fn == "is_empty":
            return FIsEmpty(source)
        if expr.fn == "project":
            raise UnsupportedCommandError(f"projection {expr} is only supported under in-dom")
        return TSetFn(expr.fn, source, expr.field)
    raise UnsupportedCommandError(f"cannot translate expression {expr!r}")


def _as_term(value: Value) -> Term:
    if isinstance(value, Formula):
        return TIte(value, TConst(True), TConst(False))
    if isinstance(value, Term):
        return value
    raise UnsupportedCommandError(f"{value} is not a scalar or record term")


def _as_formula(value: Value) -> Formula:
    if isinstance(value, Formula):
        return value
    if isinstance(value, TConst) and isinstance(value.value, bool):
        return TRUE if value.value else FALSE
    if isinstance(value, Term):
        return FEq(value, TConst(True))
    raise UnsupportedCommandError(f"{value} is not a condition")


def _term(expr: Expr, ctx: InferenceContext) -> Term:
    return _as_term(_value(expr, ctx))


def _formula(expr: Expr, ctx: InferenceContext) -> Formula:
    return _as_formula(_value(expr, ctx))


def _set(expr: Expr, ctx: InferenceContext) -> SetExpr:
    value = _value(expr, ctx)
    if not isinstance(value, SetExpr):
        raise UnsupportedCommandError(f"{expr} is not a record set")
    return value


def _shape(expr: Expr, ctx: InferenceContext) -> Shape:
    value = _value(expr, ctx)
    if not isinstance(value, Shape) or value.table is None:
        raise UnsupportedCommandError(f"cannot tell the table and fields of {expr}")
    return value


# --- commands ---------------------------------------------------------------


def _record(table: str, fields: Sequence[Tuple[str, Term]], id_: Term, ctx: InferenceContext, *, deleted: bool = False) -> SetExpr:
    var = TVar(fresh_name("r"))
    return SLit(var, FRecordIs(var, table, tuple(fields), id_, TConst(ctx.txn_id), deleted))


def _per_row(command: Union[Update, Delete], ctx: InferenceContext) -> SetExpr:
    x = TVar(fresh_name(command.var))
    inner = ctx.bind(command.var, x)
    columns = ctx.schema.get(command.table, ())
    if isinstance(command, Delete):
        written = _record(command.table, [(name, TField(x, name)) for name in columns], TField(x, "id"), ctx, deleted=True)
    else:
        value = command.value
        if isinstance(value, With) and value.base == Var(command.var):
            updates = {name: _term(item, inner) for name, item in value.updates}
            fields = [(name, updates.get(name, TField(x, name))) for name in columns]
            missing = set(updates) - set(columns)
            if missing:
                raise UnsupportedCommandError(f"UPDATE of {command.table} writes unknown fields {sorted(missing)}")
        else:
            fields = list(_shape(value, inner).fields)
        written = _record(command.table, fields, TField(x, "id"), ctx)
    cond = conj(FHasTable(x, command.table), _formula(command.cond, inner))
    return SBind(SVar(STATE), x, SIte(cond, written, SEmpty()))


def _mentions_var(command: Command, name: str) -> bool:
    for node in walk(command):
        for spec in dataclasses.fields(node):
            value = getattr(node, spec.name)
            if isinstance(value, Expr) and name in expr_free_vars(value):
                return True
    return False


def _infer(command: Command, ctx: InferenceContext) -> SetExpr:
    if isinstance(command, Skip):
        return SEmpty()
    if isinstance(command, Insert):
        shape = _shape(command.value, ctx)
        site = ctx.stats.next_site(ctx.txn_name)
        point = _record(shape.table, shape.fields, TFresh(site, ctx.nu), ctx)  # type: ignore[arg-type]
        return stabilize(point, ctx)
    if isinstance(command, (Update, Delete)):
        return stabilize(_per_row(command, ctx), ctx)
    if isinstance(command, Let):
        return _infer(command.body, ctx.bind(command.name, _value(command.value, ctx)))
    if isinstance(command, If):
        return SIte(_formula(command.cond, ctx), _infer(command.then, ctx), _infer(command.else_, ctx))
    if isinstance(command, Seq):
        first = _infer(command.first, ctx)
        second = _infer(command.second, ctx.extended(first))
        return union(first, second)
    if isinstance(command, Select):
        x = TVar(fresh_name(command.var))
        cond = _formula(command.cond, ctx.bind(command.var, x))
        query = stabilize(SLit(x, conj(FIn(x, SVar(STATE)), FHasTable(x, command.table), cond)), ctx)
        bound: Value = TPick(query) if command.single else query
        return _infer(command.body, ctx.bind(command.target, bound))
    if isinstance(command, Foreach):
        if _mentions_var(command.body, command.done_var):
            raise UnsupportedCommandError(f"FOREACH body refers to the iterated prefix {command.done_var}")
        source = _set(command.source, ctx)
        item = TVar(fresh_name(command.item_var))
        inner = dataclasses.replace(ctx.bind(command.item_var, item), nu=ctx.nu + (item,))
        return SBind(source, item, _infer(command.body, inner))
    raise UnsupportedCommandError(f"no transformer for {type(command).__name__}")


def infer(command: Command, ctx: InferenceContext) -> Transformer:
    """The transformer of a transaction body under ``ctx``."""
    body = _infer(command, ctx)
    depth = bind_nesting(body)
    if depth > 1 and not ctx.allow_deep:
        raise NestedBindDepthError(f"transformer of {ctx.txn_name} nests binds {depth} deep")
    return Transformer(body, STATE, ctx.nu)


def infer_transaction(
    decl: TxnDecl,
    program: ProgramSpec,
    rely: ConstrainedRely,
    *,
    prover=None,
    allow_deep: bool = False,
    body: Optional[Command] = None,
) -> Tuple[Transformer, InferenceContext]:
    ctx = InferenceContext.for_txn(decl, program, rely, prover=prover, allow_deep=allow_deep)
    transformer = infer(decl.body if body is None else body, ctx)
    logger.debug("transformer of %s: %s", decl.name, transformer)
    return transformer, ctx


# --- stability --------------------------------------------------------------


def check_transformer_stability(source: SetExpr, ctx: InferenceContext) -> bool:
    """``F(D) = F(D')`` for every step the constrained rely admits from ``D``.

    Without a prover the answer is conservatively ``False``.
    """
    if ctx.rely.is_identity or not mentions(source, STATE):
        return True
    if ctx.prover is None:
        return False
    later = "D'"
    local = union(ctx.context, source)
    for disjunct in ctx.rely.rely.disjuncts:
        ctx.stats.stability_queries += 1
        hypotheses = [ctx.invariant, ctx.rely.relation(disjunct, local, STATE, later)]
        goal = FSetEq(source, rename_state(source, STATE, later))  # type: ignore[arg-type]
        label = f"stable-F-{ctx.txn_name}-{disjunct.txn}"
        if not ctx.prover.valid(hypotheses, goal, label=label, pre_states=(STATE, later)):
            logger.debug("transformer of %s is not stable against %s", ctx.txn_name, disjunct.txn)
            return False
    return True


def stability_shortcut(source: SetExpr, ctx: InferenceContext) -> Optional[str]:
    """Name of a cheap argument that ``source`` is stable, if one applies."""
    if ctx.rely.is_identity:
        return "identity"
    if isinstance(source, SEmpty):
        return "empty"
    if not mentions(source, STATE):
        return "delta-free"
    reads = read_tables(source, STATE)
    if reads is not None and not ctx.rely.rely.writes_any(sorted(reads)):
        return "footprint"
    return None


def stabilize(source: SetExpr, ctx: InferenceContext) -> SetExpr:
    shortcut = stability_shortcut(source, ctx)
    if shortcut is not None:
        ctx.stats.fast_paths[shortcut] += 1
        return source
    if check_transformer_stability(source, ctx):
        return source
    ctx.stats.weakened += 1
    witness = TVar(fresh_name("D'"), "state")
    assumed = subst(ctx.invariant, {STATE: SVar(witness.name)})
    return SExists(witness, assumed, rename_state(source, STATE, witness.name))  # type: ignore[arg-type]


# --- interference-free corroboration ----------------------------------------


def serial_context(decl: TxnDecl, program: ProgramSpec) -> InferenceContext:
    return InferenceContext.for_txn(decl, program, rely_modulo(Rely(), ATOMS["ss"]))


def check_against_interpreter(
    decl: TxnDecl,
    program: ProgramSpec,
    args: Mapping[str, Any],
    delta0: Database,
) -> Tuple[bool, frozenset, frozenset]:
    """Compare the interference-free transformer with a lone run of the body.

    Returns whether they agree, the records the transformer denotes and the
    records the interpreter wrote.
    """
    transformer = infer(decl.body, serial_context(decl, program))
    records = [value for value in args.values() if isinstance(value, Record)]
    for value in args.values():
        if isinstance(value, frozenset):
            records.extend(item for item in value if isinstance(item, Record))
    env: Dict[str, Any] = {STATE: delta0}
    env.update(args)
    expected = eval_setexpr(
        transformer.body,
        env,
        universe=universe_of(delta0, records),
        first_fresh=delta0.max_id() + 1,
    )
    body = bind_params(decl.body, tuple(args.items()))
    actual = run_alone(body, program.txn_id(decl.name), delta0).records
    if expected != actual:
        logger.info("transformer of %s disagrees with the interpreter: %d vs %d records", decl.name, len(expected), len(actual))
    return expected == actual, expected, actual
