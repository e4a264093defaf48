"""Ground evaluation of formulas and set expressions over finite universes.

This is the reference semantics the encoder is tested against: every
quantifier ranges over an explicit finite universe of records (or of states),
and literals draw their candidates from their defining conjuncts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from models.errors import EvalError
from models.expr import eval_set_call
from models.logic import (
    FAnd,
    FApp,
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
    FMem,
    FNot,
    FOr,
    Formula,
    FRecordIs,
    FSetEq,
    SBind,
    SEmpty,
    SetExpr,
    SExists,
    SIte,
    SLit,
    SUnion,
    SVar,
    TApp,
    TArith,
    TConst,
    Term,
    TField,
    TFresh,
    TIte,
    TPick,
    TSetFn,
    TVar,
    TVer,
    mentions,
)
from models.values import Database, Record, wrap_int

RecordSet = FrozenSet[Record]


class FreshSupply:
    """Allocates ids in request order, memoized by allocation site and binding."""

    def __init__(self, first: int):
        self._next = first
        self._memory: Dict[Tuple[str, Tuple[Any, ...]], int] = {}

    def __call__(self, site: str, args: Tuple[Any, ...]) -> int:
        key = (site, args)
        if key not in self._memory:
            self._memory[key] = self._next
            self._next += 1
        return self._memory[key]


@dataclass(frozen=True)
class GroundContext:
    sets: Mapping[str, RecordSet] = field(default_factory=dict)
    versions: Mapping[str, int] = field(default_factory=dict)
    terms: Mapping[str, Any] = field(default_factory=dict)
    universe: Tuple[Record, ...] = ()
    states: Optional[Tuple[RecordSet, ...]] = None
    fresh: Optional[FreshSupply] = None

    @classmethod
    def build(
        cls,
        *,
        states: Optional[Mapping[str, Any]] = None,
        terms: Optional[Mapping[str, Any]] = None,
        universe: Iterable[Record] = (),
        first_fresh: Optional[int] = None,
    ) -> "GroundContext":
        sets: Dict[str, RecordSet] = {}
        versions: Dict[str, int] = {}
        for name, value in (states or {}).items():
            if isinstance(value, Database):
                sets[name] = value.records
                versions[name] = value.version
            else:
                sets[name] = frozenset(value)
        known = [record.id for records in sets.values() for record in records]
        start = first_fresh if first_fresh is not None else max(known, default=0) + 1
        return cls(
            sets=sets,
            versions=versions,
            terms=dict(terms or {}),
            universe=tuple(sorted(set(universe), key=_record_key)),
            fresh=FreshSupply(start),
        )

    def bind_term(self, name: str, value: Any) -> "GroundContext":
        terms = dict(self.terms)
        terms[name] = value
        return replace(self, terms=terms)

    def bind_set(self, name: str, value: RecordSet, version: int = 0) -> "GroundContext":
        sets = dict(self.sets)
        sets[name] = value
        versions = dict(self.versions)
        versions[name] = version
        return replace(self, sets=sets, versions=versions)


def _record_key(record: Record) -> Tuple[Any, ...]:
    return (record.id, record.table, record.txn, record.deleted, record.fields)


def all_states(universe: Sequence[Record]) -> Tuple[RecordSet, ...]:
    """Every subset of ``universe`` with unique ids, smallest first."""
    out: List[RecordSet] = []
    for size in range(len(universe) + 1):
        for combo in itertools.combinations(universe, size):
            ids = [record.id for record in combo]
            if len(set(ids)) == len(ids):
                out.append(frozenset(combo))
    return tuple(out)


# --- terms ------------------------------------------------------------------


def eval_term(term: Term, ctx: GroundContext) -> Any:
    if isinstance(term, TVar):
        if term.name in ctx.terms:
            return ctx.terms[term.name]
        raise EvalError(f"unbound variable {term.name}", code="UNBOUND-VARIABLE")
    if isinstance(term, TConst):
        return term.value
    if isinstance(term, TField):
        record = eval_term(term.base, ctx)
        if not isinstance(record, Record):
            raise EvalError(f"expected a record in {term}, got {record!r}", code="TYPE-MISMATCH")
        if not record.has(term.name):
            raise EvalError(f"record {record} has no field {term.name} in {term}", code="MISSING-FIELD")
        return record.get(term.name)
    if isinstance(term, TArith):
        left, right = eval_term(term.left, ctx), eval_term(term.right, ctx)
        return wrap_int(left + right if term.op == "+" else left - right)
    if isinstance(term, TIte):
        return eval_term(term.then if eval_formula(term.cond, ctx) else term.else_, ctx)
    if isinstance(term, TSetFn):
        return eval_set_call(term.fn, eval_set(term.source, ctx), term.field, term)  # type: ignore[arg-type]
    if isinstance(term, TPick):
        items = eval_set(term.source, ctx)
        if not items:
            raise EvalError(f"pick from an empty set in {term}", code="EMPTY-SELECT1")
        return min(items, key=_record_key)
    if isinstance(term, TFresh):
        if ctx.fresh is None:
            raise EvalError(f"no fresh-id supply for {term}", code="UNBOUND-VARIABLE")
        return ctx.fresh(term.site, tuple(eval_term(arg, ctx) for arg in term.args))
    if isinstance(term, TVer):
        state = term.state
        name = state.name if isinstance(state, TVar) else str(state)
        return ctx.versions.get(name, 0)
    if isinstance(term, TApp):
        raise EvalError(f"encoding symbol {term.name} has no ground meaning", code="TYPE-MISMATCH")
    raise EvalError(f"cannot evaluate term {term!r}", code="TYPE-MISMATCH")


# --- formulas ---------------------------------------------------------------


def _domain(var: TVar, ctx: GroundContext) -> Iterable[Any]:
    if var.sort == "rec":
        return ctx.universe
    if var.sort == "bool":
        return (False, True)
    if var.sort == "state":
        return ctx.states if ctx.states is not None else all_states(ctx.universe)
    raise EvalError(f"cannot enumerate integers for {var.name}", code="TYPE-MISMATCH")


def _bind(ctx: GroundContext, var: TVar, value: Any) -> GroundContext:
    if var.sort == "state":
        return ctx.bind_set(var.name, value)
    return ctx.bind_term(var.name, value)


def _assignments(variables: Sequence[TVar], ctx: GroundContext) -> Iterable[GroundContext]:
    if not variables:
        yield ctx
        return
    head, rest = variables[0], variables[1:]
    for value in _domain(head, ctx):
        yield from _assignments(rest, _bind(ctx, head, value))


def eval_formula(formula: Formula, ctx: GroundContext) -> bool:
    if isinstance(formula, FConst):
        return formula.value
    if isinstance(formula, FEq):
        return eval_term(formula.left, ctx) == eval_term(formula.right, ctx)
    if isinstance(formula, FCmp):
        left, right = eval_term(formula.left, ctx), eval_term(formula.right, ctx)
        return {
            "<=": left <= right,
            "<": left < right,
            ">=": left >= right,
            ">": left > right,
            "!=": left != right,
        }[formula.op]
    if isinstance(formula, FNot):
        return not eval_formula(formula.arg, ctx)
    if isinstance(formula, FAnd):
        return all(eval_formula(arg, ctx) for arg in formula.args)
    if isinstance(formula, FOr):
        return any(eval_formula(arg, ctx) for arg in formula.args)
    if isinstance(formula, FImplies):
        return (not eval_formula(formula.left, ctx)) or eval_formula(formula.right, ctx)
    if isinstance(formula, FIff):
        return eval_formula(formula.left, ctx) == eval_formula(formula.right, ctx)
    if isinstance(formula, FForall):
        return all(eval_formula(formula.body, inner) for inner in _assignments(formula.vars, ctx))
    if isinstance(formula, FExists):
        return any(eval_formula(formula.body, inner) for inner in _assignments(formula.vars, ctx))
    if isinstance(formula, FMem):
        state = formula.state
        if not isinstance(state, TVar) or state.name not in ctx.sets:
            raise EvalError(f"unbound state in {formula}", code="UNBOUND-VARIABLE")
        return eval_term(formula.elem, ctx) in ctx.sets[state.name]
    if isinstance(formula, FIn):
        return eval_term(formula.elem, ctx) in eval_set(formula.source, ctx)
    if isinstance(formula, FInProj):
        value = eval_term(formula.value, ctx)
        return any(record.has(formula.field) and record.get(formula.field) == value for record in eval_set(formula.source, ctx))
    if isinstance(formula, FIsEmpty):
        return not eval_set(formula.source, ctx)
    if isinstance(formula, FSetEq):
        return eval_set(formula.left, ctx) == eval_set(formula.right, ctx)
    if isinstance(formula, FHasTable):
        record = eval_term(formula.elem, ctx)
        return isinstance(record, Record) and record.table == formula.table
    if isinstance(formula, FRecordIs):
        record = eval_term(formula.elem, ctx)
        return isinstance(record, Record) and record == _construct(formula, ctx)
    if isinstance(formula, FApp):
        raise EvalError(f"encoding predicate {formula.name} has no ground meaning", code="TYPE-MISMATCH")
    raise EvalError(f"cannot evaluate formula {formula!r}", code="TYPE-MISMATCH")


def _construct(formula: FRecordIs, ctx: GroundContext) -> Record:
    values = {name: eval_term(term, ctx) for name, term in formula.fields}
    return Record.make(
        formula.table,
        id=eval_term(formula.id, ctx),
        txn=eval_term(formula.txn, ctx),
        deleted=formula.deleted,
        values=values,
    )


# --- set expressions --------------------------------------------------------


def _candidates(var: TVar, formula: Formula, ctx: GroundContext) -> Optional[RecordSet]:
    """A finite superset of the records satisfying ``formula``, when one is evident."""
    if isinstance(formula, FAnd):
        best: Optional[RecordSet] = None
        for arg in formula.args:
            found = _candidates(var, arg, ctx)
            if found is not None and (best is None or len(found) < len(best)):
                best = found
        return best
    if isinstance(formula, FOr):
        out: set = set()
        for arg in formula.args:
            found = _candidates(var, arg, ctx)
            if found is None:
                return None
            out |= found
        return frozenset(out)
    if isinstance(formula, FIn) and formula.elem == var and not mentions(formula.source, var.name):
        return eval_set(formula.source, ctx)
    if isinstance(formula, FMem) and formula.elem == var and isinstance(formula.state, TVar):
        return ctx.sets.get(formula.state.name)
    if isinstance(formula, FRecordIs) and formula.elem == var:
        return frozenset({_construct(formula, ctx)})
    if isinstance(formula, FEq):
        if formula.left == var and not mentions(formula.right, var.name):
            return frozenset({eval_term(formula.right, ctx)})
        if formula.right == var and not mentions(formula.left, var.name):
            return frozenset({eval_term(formula.left, ctx)})
    if isinstance(formula, FConst) and not formula.value:
        return frozenset()
    return None


def eval_set(source: SetExpr, ctx: GroundContext) -> RecordSet:
    """Denotation of a set expression under the set-monad semantics."""
    if isinstance(source, SVar):
        if source.name not in ctx.sets:
            raise EvalError(f"unbound set variable {source.name}", code="UNBOUND-VARIABLE")
        return ctx.sets[source.name]
    if isinstance(source, SEmpty):
        return frozenset()
    if isinstance(source, SLit):
        pool = _candidates(source.var, source.body, ctx)
        if pool is None:
            pool = frozenset(ctx.universe)
        return frozenset(
            record for record in sorted(pool, key=_record_key) if eval_formula(source.body, ctx.bind_term(source.var.name, record))
        )
    if isinstance(source, SExists):
        for state in _domain(source.state, ctx):
            inner = ctx.bind_set(source.state.name, state)
            if eval_formula(source.cond, inner):
                return eval_set(source.body, inner)
        return frozenset()
    if isinstance(source, SBind):
        out: set = set()
        for record in sorted(eval_set(source.source, ctx), key=_record_key):
            out |= eval_set(source.body, ctx.bind_term(source.var.name, record))
        return frozenset(out)
    if isinstance(source, SIte):
        if eval_formula(source.cond, ctx):
            return eval_set(source.then, ctx)
        return eval_set(source.else_, ctx)
    if isinstance(source, SUnion):
        left = eval_set(source.left, ctx)
        return left | eval_set(source.right, ctx)
    raise EvalError(f"cannot evaluate set {source!r}", code="TYPE-MISMATCH")


def eval_setexpr(source: SetExpr, env: Mapping[str, Any], *, universe: Iterable[Record] = (), first_fresh: Optional[int] = None) -> RecordSet:
    """Evaluate ``source`` with ``env`` mapping set names to record sets and term names to values."""
    states = {name: value for name, value in env.items() if isinstance(value, (frozenset, set, Database))}
    terms = {name: value for name, value in env.items() if name not in states}
    ctx = GroundContext.build(states=states, terms=terms, universe=universe, first_fresh=first_fresh)
    return eval_set(source, ctx)


def holds(formula: Formula, env: Mapping[str, Any], *, universe: Iterable[Record] = ()) -> bool:
    states = {name: value for name, value in env.items() if isinstance(value, (frozenset, set, Database))}
    terms = {name: value for name, value in env.items() if name not in states}
    ctx = GroundContext.build(states=states, terms=terms, universe=universe)
    return eval_formula(formula, ctx)


def universe_of(*collections: Any) -> Tuple[Record, ...]:
    records: set = set()
    for collection in collections:
        if isinstance(collection, Database):
            records |= collection.records
        elif isinstance(collection, Record):
            records.add(collection)
        else:
            records |= set(collection)
    return tuple(sorted(records, key=_record_key))
