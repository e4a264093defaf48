"""Translation of formulas over set expressions into first-order logic.

Set membership is expanded in place wherever the set is a state, a literal,
a conditional or a union. Everything else is hoisted into a fresh symbol
parameterised by the bound variables it depends on:

* ``s »= λx. s'`` becomes a boolean ``g`` with the two clauses of the
  monadic image (everything produced is in ``g``; everything in ``g`` was
  produced by some member of ``s``);
* ``exists(D', φ, s)`` becomes a boolean Skolem relation ``f(ν̄, σ)``, functional,
  total and implying ``φ(σ)``;
* ``in-proj`` and ``is_empty`` become boolean predicates defined by two
  clauses each;
* record literals become constructors ``mk`` pinned by their components;
* set functions, ``pick`` and fresh ids become Skolem functions with the
  axioms of their operator.

The resulting formulas are put in negation normal form and prenexed
mechanically, left to right.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from models.errors import EncodingError
from models.logic import (
    FALSE,
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
    Node,
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
    TRUE,
    TSetFn,
    TVar,
    TVer,
    bound_names,
    conj,
    disj,
    exists,
    forall,
    free_vars,
    fresh_name,
    implies,
    iter_children,
    neg,
    subst,
)
from models.values import Record

logger = logging.getLogger(__name__)

LOCAL_STATES = frozenset({"delta"})
NIL = TVar("nil_rec", "rec")
HIDDEN_SORTS = {"id": "int", "txn": "int", "del": "bool", "tab": "int"}


class FreshNamespace:
    """Issues ``<family>_<txn>_<n>`` names, one counter per family."""

    def __init__(self, txn: int = 0):
        self.txn = txn
        self._counters: Dict[str, itertools.count] = {}

    def issue(self, family: str) -> str:
        counter = self._counters.setdefault(family, itertools.count(1))
        return f"{family}_{self.txn}_{next(counter)}"


@dataclass(frozen=True)
class _Entry:
    name: str
    formal: Term
    actual: Term


@dataclass(frozen=True)
class Scope:
    """Variables in scope: each name maps to a formal variable and the term it stands for."""

    entries: Tuple[_Entry, ...] = ()

    def push(self, name: str, formal: Term, actual: Term) -> "Scope":
        return Scope(self.entries + (_Entry(name, formal, actual),))

    def lookup(self, name: str) -> Optional[_Entry]:
        for entry in reversed(self.entries):
            if entry.name == name:
                return entry
        return None

    def visible(self) -> List[_Entry]:
        latest: Dict[str, int] = {}
        for index, entry in enumerate(self.entries):
            latest[entry.name] = index
        return [self.entries[index] for index in sorted(latest.values())]


@dataclass
class Encoding:
    """A low-level formula together with the definitions it relies on."""

    formula: Formula
    constraints: List[Formula] = field(default_factory=list)


@dataclass(frozen=True)
class Symbol:
    name: str
    args: Tuple[str, ...]
    result: str


def term_sort(term: Term, field_sorts: Mapping[str, str]) -> str:
    if isinstance(term, TVar):
        return term.sort
    if isinstance(term, TConst):
        return "bool" if isinstance(term.value, bool) else "int"
    if isinstance(term, TField):
        return HIDDEN_SORTS.get(term.name) or field_sorts.get(term.name, "int")
    if isinstance(term, TIte):
        return term_sort(term.then, field_sorts)
    if isinstance(term, TPick):
        return "rec"
    if isinstance(term, TApp):
        return term.sort
    return "int"


class Encoder:
    """Per-query translator; collects symbols, constants and axioms as it goes."""

    def __init__(
        self,
        namespace: Optional[FreshNamespace] = None,
        *,
        schema: Optional[Mapping[str, Sequence[str]]] = None,
        field_sorts: Optional[Mapping[str, str]] = None,
        pre_states: Sequence[str] = (),
        local_states: FrozenSet[str] = LOCAL_STATES,
        keys: Optional[Mapping[str, Sequence[str]]] = None,
    ):
        self.namespace = namespace or FreshNamespace()
        self.schema: Dict[str, Tuple[str, ...]] = {name: tuple(items) for name, items in (schema or {}).items()}
        self.field_sorts: Dict[str, str] = dict(field_sorts or {})
        self.pre_states = tuple(pre_states)
        self.local_states = local_states
        self.keys: Dict[str, Tuple[str, ...]] = {name: tuple(items) for name, items in (keys or {}).items() if items}
        self.constants: Dict[str, str] = {}
        self.functions: Dict[str, Symbol] = {}
        self.fields: Dict[str, str] = {}
        self.tables: Dict[str, int] = {name: index for index, name in enumerate(sorted(self.schema))}
        self.axioms: List[Formula] = []
        self._memo: Dict[Any, Any] = {}
        self._fresh_sites: Dict[str, Symbol] = {}

    # --- entry points -------------------------------------------------------

    def declare_free(self, *nodes: Node) -> None:
        """Register the free symbols of ``nodes`` as constants."""
        for node in nodes:
            _free_symbols(node, frozenset(), self.constants)

    def encode(self, formula: Formula) -> Formula:
        self.declare_free(formula)
        return self.formula(formula, Scope())

    def encode_set(self, source: SetExpr, nu: Sequence[TVar] = ()) -> Tuple[Encoding, str]:
        """Fig-style pair: constraints and a membership predicate of arity ``len(nu) + 1``."""
        names = [var.name for var in nu]
        if len(set(names)) != len(names) or any(var.sort == "state" for var in nu):
            raise EncodingError(f"malformed iteration sequence {names} for {source}", code="MALFORMED-FREE-VARIABLES")
        self.declare_free(source)
        for var in nu:
            self.constants.pop(var.name, None)
        scope = Scope()
        for var in nu:
            scope = scope.push(var.name, var, var)
        elem = TVar(fresh_name("r"))
        before = len(self.axioms)
        name = self.namespace.issue("G")
        self.functions[name] = Symbol(name, tuple(var.sort for var in nu) + ("rec",), "bool")
        body = self.member(elem, source, scope)
        definition = forall(tuple(nu) + (elem,), FIff(FApp(name, tuple(nu) + (elem,)), body))
        constraints = self.axioms[before:] + [definition]
        return Encoding(definition, constraints), name

    def finish(self) -> List[Formula]:
        """Background axioms for the symbols used so far."""
        out: List[Formula] = self._fresh_axioms()
        for table in sorted(self.tables, key=self.tables.get):
            out.extend(self._extensionality(table))
        out.extend(self._identity_axioms())
        states = [TVar(name, "state") for name, sort in sorted(self.constants.items()) if sort == "state"]
        for state in states:
            out.extend(self._state_axioms(state))
        return out + self.axioms

    # --- scopes -------------------------------------------------------------

    def _binder(self, var: TVar) -> TVar:
        if var.name in self.constants:
            return TVar(fresh_name(var.name), var.sort)
        return var

    def _closed(self, term: Term) -> bool:
        if isinstance(term, TVar):
            return term.name in self.constants
        return all(self._closed(child) for child in iter_children(term) if isinstance(child, Term))

    def _prepare(self, node: Node, scope: Scope, exclude: Iterable[str] = ()) -> Tuple[Tuple[TVar, ...], Tuple[Term, ...], Scope, Any]:
        needed = free_vars(node) - set(exclude)
        params: List[TVar] = []
        actuals: List[Term] = []
        inner = Scope()
        closed: List[Tuple[str, Term]] = []
        for entry in scope.visible():
            if entry.name not in needed:
                continue
            if self._closed(entry.actual):
                inner = inner.push(entry.name, entry.actual, entry.actual)
                closed.append((entry.name, entry.actual))
            else:
                formal = entry.formal if isinstance(entry.formal, TVar) else TVar(entry.name, _sort_of_term(entry.formal))
                params.append(formal)
                actuals.append(entry.actual)
                inner = inner.push(entry.name, formal, formal)
        key = (node, tuple(closed), tuple((p.name, p.sort) for p in params))
        return tuple(params), tuple(actuals), inner, key

    def _declare(self, family: str, params: Sequence[TVar], result: str, extra: Sequence[str] = ()) -> str:
        name = self.namespace.issue(family)
        self.functions[name] = Symbol(name, tuple(p.sort for p in params) + tuple(extra), result)
        return name

    def _state_term(self, name: str, scope: Scope) -> Term:
        entry = scope.lookup(name)
        if entry is not None:
            return entry.actual
        self.constants.setdefault(name, "state")
        return TVar(name, "state")

    # --- formulas -----------------------------------------------------------

    def formula(self, node: Formula, scope: Scope) -> Formula:
        if isinstance(node, FConst):
            return node
        if isinstance(node, FEq):
            return FEq(self.term(node.left, scope), self.term(node.right, scope))
        if isinstance(node, FCmp):
            return FCmp(node.op, self.term(node.left, scope), self.term(node.right, scope))
        if isinstance(node, FNot):
            return neg(self.formula(node.arg, scope))
        if isinstance(node, FAnd):
            return conj(*(self.formula(arg, scope) for arg in node.args))
        if isinstance(node, FOr):
            return disj(*(self.formula(arg, scope) for arg in node.args))
        if isinstance(node, FImplies):
            return implies(self.formula(node.left, scope), self.formula(node.right, scope))
        if isinstance(node, FIff):
            return FIff(self.formula(node.left, scope), self.formula(node.right, scope))
        if isinstance(node, (FForall, FExists)):
            inner = scope
            variables = []
            for var in node.vars:
                low = self._binder(var)
                variables.append(low)
                inner = inner.push(var.name, low, low)
            body = self.formula(node.body, inner)
            maker = forall if isinstance(node, FForall) else exists
            return maker(tuple(variables), body)
        if isinstance(node, FMem):
            return FMem(self.term(node.elem, scope), self.term(node.state, scope))
        if isinstance(node, FIn):
            return self.member(self.term(node.elem, scope), node.source, scope)
        if isinstance(node, FInProj):
            return self._in_projection(node, scope)
        if isinstance(node, FIsEmpty):
            return self._is_empty(node, scope)
        if isinstance(node, FSetEq):
            x = TVar(fresh_name("x"))
            return forall((x,), FIff(self.member(x, node.left, scope), self.member(x, node.right, scope)))
        if isinstance(node, FHasTable):
            return FEq(TField(self.term(node.elem, scope), "tab"), TConst(self._table(node.table)))
        if isinstance(node, FRecordIs):
            return FEq(self.term(node.elem, scope), self._construct(node, scope))
        if isinstance(node, FApp):
            return FApp(node.name, tuple(self.term(arg, scope) for arg in node.args))
        raise EncodingError(f"cannot encode formula {node!r}", code="UNDECLARED-SYMBOL")

    def member(self, elem: Term, source: SetExpr, scope: Scope) -> Formula:
        """``elem ∈ source`` as a first-order formula."""
        if isinstance(source, SVar):
            return FMem(elem, self._state_term(source.name, scope))
        if isinstance(source, SEmpty):
            return FALSE
        if isinstance(source, SLit):
            var = self._binder(source.var)
            return self.formula(source.body, scope.push(source.var.name, var, elem))
        if isinstance(source, SIte):
            cond = self.formula(source.cond, scope)
            return disj(
                conj(cond, self.member(elem, source.then, scope)),
                conj(neg(cond), self.member(elem, source.else_, scope)),
            )
        if isinstance(source, SUnion):
            return disj(self.member(elem, source.left, scope), self.member(elem, source.right, scope))
        if isinstance(source, SBind):
            return self._bind(elem, source, scope)
        if isinstance(source, SExists):
            return self._exists_member(elem, source, scope)
        raise EncodingError(f"cannot encode set {source!r}", code="UNDECLARED-SYMBOL")

    def _bind(self, elem: Term, source: SBind, scope: Scope) -> Formula:
        params, actuals, inner, key = self._prepare(source, scope)
        name = self._memo.get(key)
        if name is None:
            name = self._declare("g", params, "bool", ("rec",))
            self._memo[key] = name
            a, b = TVar(fresh_name("a")), TVar(fresh_name("b"))
            produced = conj(
                self.member(a, source.source, inner),
                self.member(b, source.body, inner.push(source.var.name, TVar(source.var.name, source.var.sort), a)),
            )
            image = FApp(name, params + (b,))
            self.axioms.append(forall(params + (a, b), implies(produced, image)))
            self.axioms.append(forall(params + (b,), implies(image, exists((a,), produced))))
        return FApp(name, actuals + (elem,))

    def _exists_member(self, elem: Term, source: SExists, scope: Scope) -> Formula:
        """Membership in ``exists(σ, φ, s)`` through a boolean Skolem relation ``f(ν̄, σ)``.

        The relation is functional and total and implies ``φ``. Without
        parameters its unique image is pinned to a state constant ``w``.
        """
        params, actuals, inner, key = self._prepare(source, scope)
        entry = self._memo.get(key)
        if entry is None:
            name = self._declare("f", params, "bool", ("state",))
            a, b = TVar(fresh_name("a"), "state"), TVar(fresh_name("b"), "state")

            def related(state: Term) -> Formula:
                return FApp(name, params + (state,))

            self.axioms.append(forall(params + (a, b), implies(conj(related(a), related(b)), FEq(a, b))))
            self.axioms.append(forall(params, exists((a,), related(a))))
            cond = self.formula(source.cond, inner.push(source.state.name, a, a))
            self.axioms.append(forall(params + (a,), implies(related(a), cond)))
            witness: Optional[TVar] = None
            if params:
                for axiom in self._state_axioms(a):
                    self.axioms.append(forall(params + (a,), implies(related(a), axiom)))
            else:
                witness = TVar(self.namespace.issue("w"), "state")
                self.constants[witness.name] = "state"
                self.axioms.append(related(witness))
            entry = (name, witness)
            self._memo[key] = entry
        name, witness = entry
        if witness is not None:
            return self.member(elem, source.body, scope.push(source.state.name, witness, witness))
        state = TVar(fresh_name(source.state.name), "state")
        body = self.member(elem, source.body, scope.push(source.state.name, state, state))
        return forall((state,), implies(FApp(name, actuals + (state,)), body))

    def _in_projection(self, node: FInProj, scope: Scope) -> Formula:
        params, actuals, inner, key = self._prepare(node.source, scope)
        key = ("dm", node.field, key)
        name = self._memo.get(key)
        sort = HIDDEN_SORTS.get(node.field) or self.field_sorts.get(node.field, "int")
        if name is None:
            name = self._declare("dm", params, "bool", (sort,))
            self._memo[key] = name
            y, v = TVar(fresh_name("y")), TVar(fresh_name("v"), sort)
            self._note_field(node.field)
            inside = self.member(y, node.source, inner)
            self.axioms.append(forall(params + (y,), implies(inside, FApp(name, params + (TField(y, node.field),)))))
            self.axioms.append(
                forall(params + (v,), implies(FApp(name, params + (v,)), exists((y,), conj(inside, FEq(TField(y, node.field), v)))))
            )
        return FApp(name, actuals + (self.term(node.value, scope),))

    def _is_empty(self, node: FIsEmpty, scope: Scope) -> Formula:
        params, actuals, inner, key = self._prepare(node.source, scope)
        key = ("em", key)
        name = self._memo.get(key)
        if name is None:
            name = self._declare("em", params, "bool")
            self._memo[key] = name
            y = TVar(fresh_name("y"))
            inside = self.member(y, node.source, inner)
            empty = FApp(name, params)
            self.axioms.append(forall(params + (y,), implies(empty, neg(inside))))
            self.axioms.append(forall(params, implies(neg(empty), exists((y,), inside))))
        return FApp(name, actuals)

    def _construct(self, node: FRecordIs, scope: Scope) -> Term:
        shape = FRecordIs(TVar("_"), node.table, node.fields, node.id, node.txn, node.deleted)
        params, actuals, inner, key = self._prepare(shape, scope, exclude=("_",))
        name = self._memo.get(key)
        if name is None:
            name = self._declare("mk", params, "rec")
            self._memo[key] = name
            made = TApp(name, params, "rec")
            parts: List[Formula] = [
                FEq(TField(made, "tab"), TConst(self._table(node.table))),
                FEq(TField(made, "id"), self.term(node.id, inner)),
                FEq(TField(made, "txn"), self.term(node.txn, inner)),
                FEq(TField(made, "del"), TConst(node.deleted)),
            ]
            for field_name, value in node.fields:
                self._note_field(field_name, node.table)
                parts.append(FEq(TField(made, field_name), self.term(value, inner)))
            self.axioms.append(forall(params, conj(*parts)))
        return TApp(name, actuals, "rec")

    # --- terms --------------------------------------------------------------

    def term(self, node: Term, scope: Scope) -> Term:
        if isinstance(node, TVar):
            entry = scope.lookup(node.name)
            if entry is not None:
                return entry.actual
            self.constants.setdefault(node.name, node.sort)
            return node
        if isinstance(node, TConst):
            return node
        if isinstance(node, TField):
            self._note_field(node.name)
            return TField(self.term(node.base, scope), node.name)
        if isinstance(node, TArith):
            return TArith(node.op, self.term(node.left, scope), self.term(node.right, scope))
        if isinstance(node, TIte):
            return TIte(self.formula(node.cond, scope), self.term(node.then, scope), self.term(node.else_, scope))
        if isinstance(node, TVer):
            state = node.state
            if isinstance(state, TVar):
                return TApp("ver", (self._state_term(state.name, scope),), "int")
            return TApp("ver", (self.term(state, scope),), "int")
        if isinstance(node, TSetFn):
            return self._set_function(node, scope)
        if isinstance(node, TPick):
            return self._pick(node, scope)
        if isinstance(node, TFresh):
            return self._fresh(node, scope)
        if isinstance(node, TApp):
            return TApp(node.name, tuple(self.term(arg, scope) for arg in node.args), node.sort)
        raise EncodingError(f"cannot encode term {node!r}", code="UNDECLARED-SYMBOL")

    def _set_function(self, node: TSetFn, scope: Scope) -> Term:
        params, actuals, inner, key = self._prepare(node.source, scope)
        key = ("sf", node.fn, node.field, key)
        name = self._memo.get(key)
        if name is None:
            name = self._declare("sf", params, "int")
            self._memo[key] = name
            value = TApp(name, params, "int")
            if node.fn in ("size", "count"):
                self.axioms.append(forall(params, FCmp(">=", value, TConst(0))))
            elif node.fn in ("max", "min"):
                column = node.field or "id"
                self._note_field(column)
                y, z = TVar(fresh_name("y")), TVar(fresh_name("z"))
                bound = FCmp("<=" if node.fn == "max" else ">=", TField(y, column), value)
                self.axioms.append(forall(params + (y,), implies(self.member(y, node.source, inner), bound)))
                attained = exists((z,), conj(self.member(z, node.source, inner), FEq(TField(z, column), value)))
                self.axioms.append(forall(params + (y,), implies(self.member(y, node.source, inner), attained)))
        return TApp(name, actuals, "int")

    def _pick(self, node: TPick, scope: Scope) -> Term:
        params, actuals, inner, key = self._prepare(node.source, scope)
        key = ("pk", key)
        name = self._memo.get(key)
        if name is None:
            name = self._declare("pk", params, "rec")
            self._memo[key] = name
            chosen = TApp(name, params, "rec")
            x = TVar(fresh_name("x"))
            smallest = conj(self.member(chosen, node.source, inner), FCmp("<=", TField(chosen, "id"), TField(x, "id")))
            self.axioms.append(forall(params + (x,), implies(self.member(x, node.source, inner), smallest)))
            y = TVar(fresh_name("y"))
            self.constants[NIL.name] = "rec"
            inhabited = exists((y,), self.member(y, node.source, inner))
            self.axioms.append(forall(params, disj(inhabited, FEq(chosen, NIL))))
        return TApp(name, actuals, "rec")

    def _fresh(self, node: TFresh, scope: Scope) -> Term:
        args = tuple(self.term(arg, scope) for arg in node.args)
        symbol = self._fresh_sites.get(node.site)
        if symbol is None:
            name = self.namespace.issue("nid")
            symbol = Symbol(name, tuple(term_sort(arg, self.field_sorts) for arg in node.args), "int")
            self._fresh_sites[node.site] = symbol
            self.functions[name] = symbol
        return TApp(symbol.name, args, "int")

    # --- background ---------------------------------------------------------

    def _table(self, name: str) -> int:
        if name not in self.tables:
            self.tables[name] = len(self.tables)
        return self.tables[name]

    def _note_field(self, name: str, table: Optional[str] = None) -> None:
        if name in HIDDEN_SORTS:
            return
        self.fields.setdefault(name, self.field_sorts.get(name, "int"))
        if table is not None and name not in self.schema.get(table, ()):
            self.schema[table] = self.schema.get(table, ()) + (name,)

    def _extensionality(self, table: str) -> List[Formula]:
        x, y = TVar(fresh_name("x")), TVar(fresh_name("y"))
        index = TConst(self.tables[table])
        same = [FEq(TField(x, "tab"), index), FEq(TField(y, "tab"), index)]
        for name in ("id", "txn", "del") + self.schema.get(table, ()):
            if name not in HIDDEN_SORTS:
                self._note_field(name)
            same.append(FEq(TField(x, name), TField(y, name)))
        return [forall((x, y), implies(conj(*same), FEq(x, y)))]

    def _state_axioms(self, state: Term) -> List[Formula]:
        x, y = TVar(fresh_name("x")), TVar(fresh_name("y"))
        out = [
            forall(
                (x, y),
                implies(conj(FMem(x, state), FMem(y, state), FEq(TField(x, "id"), TField(y, "id"))), FEq(x, y)),
            )
        ]
        name = state.name if isinstance(state, (TVar, TApp)) else ""
        if NIL.name in self.constants:
            out.append(neg(FMem(NIL, state)))
        if name not in self.local_states:
            z = TVar(fresh_name("x"))
            out.append(forall((z,), implies(FMem(z, state), FEq(TField(z, "del"), TConst(False)))))
        return out

    def _identity_axioms(self) -> List[Formula]:
        """An id names one table; key fields and ids of keyed tables determine each other."""
        x, y = TVar(fresh_name("x")), TVar(fresh_name("y"))
        same_id = FEq(TField(x, "id"), TField(y, "id"))
        out = [forall((x, y), implies(same_id, FEq(TField(x, "tab"), TField(y, "tab"))))]
        for table, names in sorted(self.keys.items()):
            index = TConst(self._table(table))
            x, y = TVar(fresh_name("x")), TVar(fresh_name("y"))
            for name in names:
                self._note_field(name, table)
            same_key = conj(*(FEq(TField(x, name), TField(y, name)) for name in names))
            tables = conj(FEq(TField(x, "tab"), index), FEq(TField(y, "tab"), index))
            out.append(forall((x, y), implies(tables, FIff(FEq(TField(x, "id"), TField(y, "id")), same_key))))
        return out

    def _fresh_axioms(self) -> List[Formula]:
        out: List[Formula] = []
        sites = list(self._fresh_sites.values())
        for symbol in sites:
            args = tuple(TVar(fresh_name("a"), sort) for sort in symbol.args)
            value = TApp(symbol.name, args, "int")
            for state in self.pre_states:
                y = TVar(fresh_name("y"))
                out.append(forall(args + (y,), implies(FMem(y, TVar(state, "state")), neg(FEq(TField(y, "id"), value)))))
                self.constants.setdefault(state, "state")
            if args:
                other = tuple(TVar(fresh_name("b"), sort) for sort in symbol.args)
                same = FEq(value, TApp(symbol.name, other, "int"))
                out.append(forall(args + other, implies(same, conj(*(FEq(a, b) for a, b in zip(args, other))))))
        for first, second in itertools.combinations(sites, 2):
            left = tuple(TVar(fresh_name("a"), sort) for sort in first.args)
            right = tuple(TVar(fresh_name("b"), sort) for sort in second.args)
            out.append(forall(left + right, neg(FEq(TApp(first.name, left, "int"), TApp(second.name, right, "int")))))
        return out


def _sort_of_term(term: Term) -> str:
    if isinstance(term, (TVar, TApp)):
        return term.sort
    return "rec"


def _free_symbols(node: Node, bound: FrozenSet[str], out: Dict[str, str]) -> None:
    if isinstance(node, TVar):
        if node.name not in bound:
            out.setdefault(node.name, node.sort)
        return
    if isinstance(node, SVar):
        if node.name not in bound:
            out.setdefault(node.name, "state")
        return
    inner = bound | set(bound_names(node))
    if isinstance(node, SBind):
        _free_symbols(node.source, bound, out)
        _free_symbols(node.body, inner, out)
        return
    for child in iter_children(node):
        _free_symbols(child, inner, out)


# --- normal forms -----------------------------------------------------------


def has_quantifier(node: Formula) -> bool:
    if isinstance(node, (FForall, FExists)):
        return True
    return any(has_quantifier(child) for child in iter_children(node) if isinstance(child, Formula))


def nnf(node: Formula, positive: bool = True) -> Formula:
    """Negation normal form; quantifier-free biconditionals stay atomic."""
    if isinstance(node, FNot):
        return nnf(node.arg, not positive)
    if isinstance(node, FAnd):
        parts = [nnf(arg, positive) for arg in node.args]
        return conj(*parts) if positive else disj(*parts)
    if isinstance(node, FOr):
        parts = [nnf(arg, positive) for arg in node.args]
        return disj(*parts) if positive else conj(*parts)
    if isinstance(node, FImplies):
        if positive:
            return disj(nnf(node.left, False), nnf(node.right, True))
        return conj(nnf(node.left, True), nnf(node.right, False))
    if isinstance(node, FIff) and (has_quantifier(node.left) or has_quantifier(node.right)):
        left, right = node.left, node.right
        if positive:
            return conj(disj(nnf(left, False), nnf(right, True)), disj(nnf(left, True), nnf(right, False)))
        return disj(conj(nnf(left, True), nnf(right, False)), conj(nnf(left, False), nnf(right, True)))
    if isinstance(node, FForall):
        body = nnf(node.body, positive)
        return forall(node.vars, body) if positive else exists(node.vars, body)
    if isinstance(node, FExists):
        body = nnf(node.body, positive)
        return exists(node.vars, body) if positive else forall(node.vars, body)
    if isinstance(node, FConst):
        return node if positive else FConst(not node.value)
    return node if positive else FNot(node)


def prenex(node: Formula) -> Formula:
    """Pull every quantifier of an NNF formula to the front, left to right, renaming bound variables."""
    counter = itertools.count()
    prefix, matrix = _pull(nnf(node), counter)
    result = matrix
    for kind, group in reversed(_group(prefix)):
        result = FForall(group, result) if kind == "A" else FExists(group, result)
    return result


def _pull(node: Formula, counter) -> Tuple[List[Tuple[str, TVar]], Formula]:
    if isinstance(node, (FForall, FExists)):
        kind = "A" if isinstance(node, FForall) else "E"
        mapping = {}
        prefix = []
        for var in node.vars:
            new = TVar(f"q!{next(counter)}", var.sort)
            mapping[var.name] = new
            prefix.append((kind, new))
        inner_prefix, matrix = _pull(subst(node.body, mapping), counter)  # type: ignore[arg-type]
        return prefix + inner_prefix, matrix
    if isinstance(node, (FAnd, FOr)):
        prefix: List[Tuple[str, TVar]] = []
        parts = []
        for arg in node.args:
            sub_prefix, matrix = _pull(arg, counter)
            prefix.extend(sub_prefix)
            parts.append(matrix)
        return prefix, (FAnd(tuple(parts)) if isinstance(node, FAnd) else FOr(tuple(parts)))
    return [], node


def _group(prefix: List[Tuple[str, TVar]]) -> List[Tuple[str, Tuple[TVar, ...]]]:
    groups: List[Tuple[str, Tuple[TVar, ...]]] = []
    for kind, var in prefix:
        if groups and groups[-1][0] == kind:
            groups[-1] = (kind, groups[-1][1] + (var,))
        else:
            groups.append((kind, (var,)))
    return groups


def prenex_signature(node: Formula) -> str:
    """Quantifier prefix as a string of ∀ and ∃; the matrix must be quantifier-free."""
    signature = ""
    while isinstance(node, (FForall, FExists)):
        signature += ("∀" if isinstance(node, FForall) else "∃") * len(node.vars)
        node = node.body
    if has_quantifier(node):
        raise EncodingError(f"formula is not in prenex form: {node}", code="NON-PRENEX")
    return signature


def check_gks(node: Formula) -> bool:
    """At most two universal quantifiers precede any existential one."""
    signature = prenex_signature(node)
    last_exists = signature.rfind("∃")
    if last_exists < 0:
        return True
    return signature[:last_exists].count("∀") <= 2


def split_conjuncts(node: Formula) -> List[Formula]:
    if isinstance(node, FAnd):
        out: List[Formula] = []
        for arg in node.args:
            out.extend(split_conjuncts(arg))
        return out
    if node == TRUE:
        return []
    return [node]


# --- ground facts -----------------------------------------------------------


def record_constant(record: Record, index: int) -> TVar:
    return TVar(f"c{index}_{record.table}_{record.id}", "rec")


def ground_facts(states: Mapping[str, Iterable[Record]], extra: Iterable[Record] = ()) -> Tuple[List[Formula], Dict[Record, TVar]]:
    """Formulas pinning each named state to exactly the given records.

    Returns the facts and the record constants, so callers can ask about
    membership of a specific record.
    """
    pools = {name: tuple(records) for name, records in states.items()}
    everything = sorted(
        {record for records in pools.values() for record in records} | set(extra),
        key=lambda record: (record.id, record.table, record.txn, record.deleted, record.fields),
    )
    constants = {record: record_constant(record, index) for index, record in enumerate(everything)}
    facts: List[Formula] = []
    for record, const in constants.items():
        fields = tuple((name, TConst(value)) for name, value in record.fields)
        facts.append(FRecordIs(const, record.table, fields, TConst(record.id), TConst(record.txn), record.deleted))
    for name in sorted(pools):
        x = TVar(fresh_name("x"))
        members = disj(*(FEq(x, constants[record]) for record in pools[name]))
        facts.append(forall((x,), FIff(FIn(x, SVar(name)), members)))
    return facts, constants
