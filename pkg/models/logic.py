"""Terms, formulas and the set language, in one module.

Set expressions appear inside formulas (membership ``t ∈ s``, set functions,
picks) and formulas appear inside set expressions (literal conditions, ``ite``,
``exists``), so the three syntactic categories share a base class and the
generic traversal helpers below.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, fields, replace
from typing import Any, Callable, Dict, FrozenSet, Iterator, Mapping, Optional, Tuple, Union

SORTS = ("rec", "int", "bool", "state")

_fresh_counter = itertools.count(1)


def fresh_name(base: str) -> str:
    """A name no parser-produced identifier can collide with."""
    root = base.split("#", 1)[0]
    return f"{root}#{next(_fresh_counter)}"


class Node:
    """Common base; ``_binders`` lists fields holding bound variables."""

    _binders: Tuple[str, ...] = ()


class Term(Node):
    pass


class Formula(Node):
    pass


class SetExpr(Node):
    pass


# --- terms ------------------------------------------------------------------


@dataclass(frozen=True)
class TVar(Term):
    name: str
    sort: str = "rec"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class TConst(Term):
    value: Union[int, bool]

    def __str__(self) -> str:
        if isinstance(self.value, bool):
            return "true" if self.value else "false"
        return str(self.value)


@dataclass(frozen=True)
class TField(Term):
    """Field projection; ``id``, ``txn`` and ``del`` name the hidden fields."""

    base: Term
    name: str

    def __str__(self) -> str:
        return f"{self.base}.{self.name}"


@dataclass(frozen=True)
class TArith(Term):
    op: str
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"({self.op} {self.left} {self.right})"


@dataclass(frozen=True)
class TIte(Term):
    cond: Formula
    then: Term
    else_: Term

    def __str__(self) -> str:
        return f"(ite {self.cond} {self.then} {self.else_})"


@dataclass(frozen=True)
class TSetFn(Term):
    """``size``/``count``/``sum``/``max``/``min`` of a record set."""

    fn: str
    source: SetExpr
    field: Optional[str] = None

    def __str__(self) -> str:
        suffix = f" {self.field}" if self.field else ""
        return f"({self.fn} {self.source}{suffix})"


@dataclass(frozen=True)
class TPick(Term):
    """The minimum-id member of a record set."""

    source: SetExpr

    def __str__(self) -> str:
        return f"(pick {self.source})"


@dataclass(frozen=True)
class TFresh(Term):
    """A fresh record id allocated at ``site`` for one binding of ``args``."""

    site: str
    args: Tuple[Term, ...] = ()

    def __str__(self) -> str:
        inner = "".join(f" {arg}" for arg in self.args)
        return f"(fresh {self.site}{inner})"


@dataclass(frozen=True)
class TVer(Term):
    """Commit version of a database state."""

    state: Term

    def __str__(self) -> str:
        return f"(ver {self.state})"


@dataclass(frozen=True)
class TApp(Term):
    """Application of an encoding-level function symbol."""

    name: str
    args: Tuple[Term, ...]
    sort: str

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"({self.name} " + " ".join(str(arg) for arg in self.args) + ")"


# --- formulas ---------------------------------------------------------------


@dataclass(frozen=True)
class FConst(Formula):
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


TRUE = FConst(True)
FALSE = FConst(False)


@dataclass(frozen=True)
class FEq(Formula):
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"(= {self.left} {self.right})"


@dataclass(frozen=True)
class FCmp(Formula):
    op: str
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"({self.op} {self.left} {self.right})"


@dataclass(frozen=True)
class FNot(Formula):
    arg: Formula

    def __str__(self) -> str:
        return f"(not {self.arg})"


@dataclass(frozen=True)
class FAnd(Formula):
    args: Tuple[Formula, ...]

    def __str__(self) -> str:
        return "(and " + " ".join(str(arg) for arg in self.args) + ")"


@dataclass(frozen=True)
class FOr(Formula):
    args: Tuple[Formula, ...]

    def __str__(self) -> str:
        return "(or " + " ".join(str(arg) for arg in self.args) + ")"


@dataclass(frozen=True)
class FImplies(Formula):
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return f"(=> {self.left} {self.right})"


@dataclass(frozen=True)
class FIff(Formula):
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return f"(<=> {self.left} {self.right})"


def _show_binders(variables: Tuple["TVar", ...]) -> str:
    return " ".join(f"({var.name} {var.sort})" for var in variables)


@dataclass(frozen=True)
class FForall(Formula):
    vars: Tuple[TVar, ...]
    body: Formula
    _binders = ("vars",)

    def __str__(self) -> str:
        return f"(forall ({_show_binders(self.vars)}) {self.body})"


@dataclass(frozen=True)
class FExists(Formula):
    vars: Tuple[TVar, ...]
    body: Formula
    _binders = ("vars",)

    def __str__(self) -> str:
        return f"(exists ({_show_binders(self.vars)}) {self.body})"


@dataclass(frozen=True)
class FMem(Formula):
    """Uninterpreted membership of a record in a state term."""

    elem: Term
    state: Term

    def __str__(self) -> str:
        return f"(mem {self.elem} {self.state})"


@dataclass(frozen=True)
class FIn(Formula):
    elem: Term
    source: SetExpr

    def __str__(self) -> str:
        return f"(in {self.elem} {self.source})"


@dataclass(frozen=True)
class FInProj(Formula):
    """``value`` equals the ``field`` of some member of ``source``."""

    value: Term
    source: SetExpr
    field: str = "id"

    def __str__(self) -> str:
        return f"(in-proj {self.value} {self.source} {self.field})"


@dataclass(frozen=True)
class FIsEmpty(Formula):
    source: SetExpr

    def __str__(self) -> str:
        return f"(is_empty {self.source})"


@dataclass(frozen=True)
class FSetEq(Formula):
    left: SetExpr
    right: SetExpr

    def __str__(self) -> str:
        return f"(set= {self.left} {self.right})"


@dataclass(frozen=True)
class FHasTable(Formula):
    elem: Term
    table: str

    def __str__(self) -> str:
        return f"(table {self.elem} {self.table})"


@dataclass(frozen=True)
class FRecordIs(Formula):
    """``elem`` is exactly the record with these components."""

    elem: Term
    table: str
    fields: Tuple[Tuple[str, Term], ...]
    id: Term
    txn: Term
    deleted: bool = False

    def __str__(self) -> str:
        body = "".join(f" ({name} {value})" for name, value in self.fields)
        flag = " del" if self.deleted else ""
        return f"(is-record {self.elem} {self.table} (id {self.id}) (txn {self.txn}){flag}{body})"


@dataclass(frozen=True)
class FApp(Formula):
    """Application of an uninterpreted predicate introduced by the encoding."""

    name: str
    args: Tuple[Term, ...]

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"({self.name} " + " ".join(str(arg) for arg in self.args) + ")"


# --- set expressions --------------------------------------------------------


@dataclass(frozen=True)
class SVar(SetExpr):
    """A set variable: a database state, the local database or a set parameter."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class SEmpty(SetExpr):
    def __str__(self) -> str:
        return "(empty)"


@dataclass(frozen=True)
class SLit(SetExpr):
    var: TVar
    body: Formula
    _binders = ("var",)

    def __str__(self) -> str:
        return f"(lit ({self.var.name}) {self.body})"


@dataclass(frozen=True)
class SExists(SetExpr):
    """``exists(state, cond, body)``: some state satisfying ``cond``."""

    state: TVar
    cond: Formula
    body: SetExpr
    _binders = ("state",)

    def __str__(self) -> str:
        return f"(exists-state ({self.state.name}) {self.cond} {self.body})"


@dataclass(frozen=True)
class SBind(SetExpr):
    source: SetExpr
    var: TVar
    body: SetExpr
    _binders = ("var",)

    def __str__(self) -> str:
        return f"(bind {self.source} ({self.var.name}) {self.body})"


@dataclass(frozen=True)
class SIte(SetExpr):
    cond: Formula
    then: SetExpr
    else_: SetExpr

    def __str__(self) -> str:
        return f"(ite {self.cond} {self.then} {self.else_})"


@dataclass(frozen=True)
class SUnion(SetExpr):
    left: SetExpr
    right: SetExpr

    def __str__(self) -> str:
        return f"(union {self.left} {self.right})"


@dataclass(frozen=True)
class Transformer:
    """``λΔ. body`` with the iteration variables ``nu`` free in ``body``."""

    body: SetExpr
    param: str = "D"
    nu: Tuple[TVar, ...] = ()

    def at(self, state: str) -> SetExpr:
        if state == self.param:
            return self.body
        return rename_state(self.body, self.param, state)

    def __str__(self) -> str:
        return f"(lambda ({self.param}) {self.body})"


# --- smart constructors -----------------------------------------------------


def conj(*args: Formula) -> Formula:
    items = []
    for arg in args:
        if isinstance(arg, FConst):
            if not arg.value:
                return FALSE
            continue
        if isinstance(arg, FAnd):
            items.extend(arg.args)
        else:
            items.append(arg)
    if not items:
        return TRUE
    return items[0] if len(items) == 1 else FAnd(tuple(items))


def disj(*args: Formula) -> Formula:
    items = []
    for arg in args:
        if isinstance(arg, FConst):
            if arg.value:
                return TRUE
            continue
        if isinstance(arg, FOr):
            items.extend(arg.args)
        else:
            items.append(arg)
    if not items:
        return FALSE
    return items[0] if len(items) == 1 else FOr(tuple(items))


def neg(arg: Formula) -> Formula:
    if isinstance(arg, FConst):
        return FConst(not arg.value)
    if isinstance(arg, FNot):
        return arg.arg
    return FNot(arg)


def implies(left: Formula, right: Formula) -> Formula:
    if left == TRUE:
        return right
    if left == FALSE or right == TRUE:
        return TRUE
    return FImplies(left, right)


def forall(variables: Tuple[TVar, ...], body: Formula) -> Formula:
    if not variables or isinstance(body, FConst):
        return body
    return FForall(tuple(variables), body)


def exists(variables: Tuple[TVar, ...], body: Formula) -> Formula:
    if not variables or isinstance(body, FConst):
        return body
    return FExists(tuple(variables), body)


def union(*sets: SetExpr) -> SetExpr:
    items = [item for item in sets if not isinstance(item, SEmpty)]
    if not items:
        return SEmpty()
    result = items[0]
    for item in items[1:]:
        result = SUnion(result, item)
    return result


def member(elem: Term, source: SetExpr) -> Formula:
    if isinstance(source, SEmpty):
        return FALSE
    return FIn(elem, source)


def hidden(base: Term, name: str) -> TField:
    return TField(base, name)


# --- generic traversal ------------------------------------------------------


def _is_node(value: Any) -> bool:
    return isinstance(value, Node)


def iter_children(node: Node) -> Iterator[Node]:
    """Sub-nodes in non-binder positions, left to right."""
    for spec in fields(node):
        if spec.name in node._binders:
            continue
        yield from _iter_value(getattr(node, spec.name))


def _iter_value(value: Any) -> Iterator[Node]:
    if _is_node(value):
        yield value
    elif isinstance(value, tuple):
        for item in value:
            yield from _iter_value(item)


def map_children(node: Node, fn: Callable[[Node], Node]) -> Node:
    changes: Dict[str, Any] = {}
    for spec in fields(node):
        if spec.name in node._binders:
            continue
        value = getattr(node, spec.name)
        mapped = _map_value(value, fn)
        if mapped != value:
            changes[spec.name] = mapped
    return replace(node, **changes) if changes else node


def _map_value(value: Any, fn: Callable[[Node], Node]) -> Any:
    if _is_node(value):
        return fn(value)
    if isinstance(value, tuple):
        return tuple(_map_value(item, fn) for item in value)
    return value


def bound_names(node: Node) -> Tuple[str, ...]:
    names = []
    for binder in node._binders:
        value = getattr(node, binder)
        if isinstance(value, tuple):
            names.extend(var.name for var in value)
        else:
            names.append(value.name)
    return tuple(names)


def free_vars(node: Node) -> FrozenSet[str]:
    """Free term and set variable names."""
    if isinstance(node, (TVar, SVar)):
        return frozenset({node.name})
    names: FrozenSet[str] = frozenset()
    for child in iter_children(node):
        names |= free_vars(child)
    if isinstance(node, SBind):
        return free_vars(node.source) | (free_vars(node.body) - {node.var.name})
    return names - set(bound_names(node))


def _rebind(node: Node, binder_map: Dict[str, str]) -> Node:
    """Rename binder variables of ``node`` per ``binder_map``."""
    changes: Dict[str, Any] = {}
    for binder in node._binders:
        value = getattr(node, binder)
        if isinstance(value, tuple):
            changes[binder] = tuple(TVar(binder_map.get(var.name, var.name), var.sort) for var in value)
        else:
            changes[binder] = TVar(binder_map.get(value.name, value.name), value.sort)
    return replace(node, **changes)


def subst(node: Node, mapping: Mapping[str, Node]) -> Node:
    """Capture-avoiding substitution of term and set variables.

    A ``TVar`` of sort ``state`` is replaced only when the mapping sends its
    name to an ``SVar`` (a renaming) or to a term.
    """
    if not mapping:
        return node
    if isinstance(node, TVar):
        target = mapping.get(node.name)
        if target is None:
            return node
        if isinstance(target, Term):
            return target
        if isinstance(target, SVar):
            return TVar(target.name, node.sort)
        raise TypeError(f"cannot substitute set {target} for term variable {node.name}")
    if isinstance(node, SVar):
        target = mapping.get(node.name)
        if target is None:
            return node
        if isinstance(target, SetExpr):
            return target
        if isinstance(target, TVar) and target.sort == "state":
            return SVar(target.name)
        raise TypeError(f"cannot substitute term {target} for set variable {node.name}")
    if not node._binders:
        return map_children(node, lambda child: subst(child, mapping))
    binders = bound_names(node)
    if isinstance(node, SBind):
        source = subst(node.source, mapping)
        inner = {key: value for key, value in mapping.items() if key not in binders}
        node = replace(node, source=source)
        return _subst_under(node, inner, binders, skip=("source",))
    inner = {key: value for key, value in mapping.items() if key not in binders}
    return _subst_under(node, inner, binders)


def _subst_under(node: Node, inner: Mapping[str, Node], binders: Tuple[str, ...], skip: Tuple[str, ...] = ()) -> Node:
    if not inner:
        return node
    captured: FrozenSet[str] = frozenset()
    for value in inner.values():
        captured |= free_vars(value)
    renames = {name: fresh_name(name) for name in binders if name in captured}
    if renames:
        node = _rebind(node, renames)
        rename_map: Dict[str, Node] = {old: _renamed_var(node, new) for old, new in renames.items()}
        node = _map_fields(node, lambda child: subst(child, rename_map), skip)
    return _map_fields(node, lambda child: subst(child, inner), skip)


def _renamed_var(node: Node, new: str) -> Node:
    for binder in node._binders:
        value = getattr(node, binder)
        for var in value if isinstance(value, tuple) else (value,):
            if var.name == new:
                if var.sort == "state":
                    return SVar(new)
                return TVar(new, var.sort)
    return TVar(new)


def _map_fields(node: Node, fn: Callable[[Node], Node], skip: Tuple[str, ...]) -> Node:
    changes: Dict[str, Any] = {}
    for spec in fields(node):
        if spec.name in node._binders or spec.name in skip:
            continue
        value = getattr(node, spec.name)
        mapped = _map_value(value, fn)
        if mapped != value:
            changes[spec.name] = mapped
    return replace(node, **changes) if changes else node


def rename_state(node: Node, old: str, new: str) -> Node:
    return subst(node, {old: SVar(new)})


# --- queries over set expressions -------------------------------------------


def nested_sets(node: Node) -> Iterator[SetExpr]:
    """Set expressions reachable from ``node`` without crossing another set."""
    for child in iter_children(node):
        if isinstance(child, SetExpr):
            yield child
        else:
            yield from nested_sets(child)


def bind_nesting(node: Node) -> int:
    """Binds nested under another bind along the deepest chain (S¹ means ≤ 1)."""
    return max(_bind_chain(node) - 1, 0)


def _bind_chain(node: Node) -> int:
    if isinstance(node, SBind):
        return max(_bind_chain(node.source), 1 + _bind_chain(node.body))
    deepest = 0
    for child in iter_children(node):
        deepest = max(deepest, _bind_chain(child))
    return deepest


def mentions(node: Node, name: str) -> bool:
    return name in free_vars(node)


def contains(node: Node, kind: type) -> bool:
    if isinstance(node, kind):
        return True
    return any(contains(child, kind) for child in iter_children(node))


def read_tables(node: Node, state: str) -> Optional[FrozenSet[str]]:
    """Tables whose records of ``state`` the expression may observe.

    ``None`` means the footprint could not be bounded.
    """
    tables: set = set()
    if not _collect_reads(node, state, tables):
        return None
    return frozenset(tables)


def _collect_reads(node: Node, state: str, tables: set) -> bool:
    if isinstance(node, SVar):
        return node.name != state
    if isinstance(node, (FIn, FInProj)) and isinstance(node.source, SVar) and node.source.name == state:
        return False
    if isinstance(node, SLit) and mentions(node.body, state):
        table = _literal_table(node)
        direct = _reads_directly(node.body, node.var, state)
        if direct:
            if table is None:
                return False
            tables.add(table)
        return all(_collect_reads(child, state, tables) for child in _non_direct_children(node.body, node.var, state))
    if isinstance(node, SBind) and isinstance(node.source, SVar) and node.source.name == state:
        table = _guarded_table(node.body, node.var)
        if table is None:
            return False
        tables.add(table)
        return _collect_reads(node.body, state, tables)
    if isinstance(node, SExists):
        return True
    return all(_collect_reads(child, state, tables) for child in iter_children(node))


def _conjuncts(formula: Formula) -> Tuple[Formula, ...]:
    if isinstance(formula, FAnd):
        out: Tuple[Formula, ...] = ()
        for arg in formula.args:
            out += _conjuncts(arg)
        return out
    return (formula,)


def _literal_table(lit: SLit) -> Optional[str]:
    for item in _conjuncts(lit.body):
        if isinstance(item, FHasTable) and item.elem == lit.var:
            return item.table
        if isinstance(item, FRecordIs) and item.elem == lit.var:
            return item.table
    return None


def _guarded_table(body: SetExpr, var: TVar) -> Optional[str]:
    if isinstance(body, SIte):
        for item in _conjuncts(body.cond):
            if isinstance(item, FHasTable) and item.elem == var:
                return item.table
    return None


def _reads_directly(body: Formula, var: TVar, state: str) -> bool:
    for item in _conjuncts(body):
        if isinstance(item, FIn) and item.elem == var and isinstance(item.source, SVar) and item.source.name == state:
            return True
    return False


def _non_direct_children(body: Formula, var: TVar, state: str) -> Iterator[Node]:
    for item in _conjuncts(body):
        if isinstance(item, FIn) and item.elem == var and isinstance(item.source, SVar) and item.source.name == state:
            continue
        yield item
