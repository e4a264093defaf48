"""SMT-LIB v2 text for encoded queries."""

from __future__ import annotations

from typing import Dict, Iterable, List, Mapping, Optional, Sequence

from models.errors import EncodingError
from models.logic import (
    FAnd,
    FApp,
    FCmp,
    FConst,
    FEq,
    FExists,
    FForall,
    FIff,
    FImplies,
    FMem,
    FNot,
    FOr,
    Formula,
    TApp,
    TArith,
    TConst,
    Term,
    TField,
    TIte,
    TVar,
)
from models.values import INT_BITS
from services.encoding import HIDDEN_SORTS, Symbol

LOGICS = {"bv": "ALL", "int": "UFLIA"}
HIDDEN_ACCESSORS = {"id": "rec_id", "txn": "rec_txn", "del": "rec_del", "tab": "rec_tab"}
BV_COMPARE = {"<": "bvslt", "<=": "bvsle", ">": "bvsgt", ">=": "bvsge"}
BV_ARITH = {"+": "bvadd", "-": "bvsub"}


def _quote(name: str) -> str:
    if "|" in name or "\\" in name:
        raise EncodingError(f"symbol {name!r} cannot be quoted", code="UNDECLARED-SYMBOL")
    return f"|{name}|"


class Printer:
    """Renders low-level terms and formulas; renames generated names in order of first use."""

    def __init__(self, int_mode: str = "bv"):
        self.int_mode = int_mode
        self.names: Dict[str, str] = {}
        self._roots: Dict[str, int] = {}

    def name(self, raw: str) -> str:
        if "#" not in raw:
            return _quote(raw)
        if raw not in self.names:
            root = raw.split("#", 1)[0]
            count = self._roots.get(root, 0)
            self._roots[root] = count + 1
            self.names[raw] = f"{root}!{count}"
        return _quote(self.names[raw])

    def sort(self, sort: str) -> str:
        if sort == "rec":
            return "Rec"
        if sort == "state":
            return "State"
        if sort == "bool":
            return "Bool"
        return self.int_sort

    @property
    def int_sort(self) -> str:
        return f"(_ BitVec {INT_BITS})" if self.int_mode == "bv" else "Int"

    def literal(self, value: int) -> str:
        if self.int_mode == "bv":
            return f"(_ bv{value % (1 << INT_BITS)} {INT_BITS})"
        return str(value) if value >= 0 else f"(- {-value})"

    def term(self, node: Term) -> str:
        if isinstance(node, TVar):
            return self.name(node.name)
        if isinstance(node, TConst):
            if isinstance(node.value, bool):
                return "true" if node.value else "false"
            return self.literal(node.value)
        if isinstance(node, TField):
            accessor = HIDDEN_ACCESSORS.get(node.name) or f"|fld_{node.name}|"
            return f"({accessor} {self.term(node.base)})"
        if isinstance(node, TArith):
            op = BV_ARITH[node.op] if self.int_mode == "bv" else node.op
            return f"({op} {self.term(node.left)} {self.term(node.right)})"
        if isinstance(node, TIte):
            return f"(ite {self.formula(node.cond)} {self.term(node.then)} {self.term(node.else_)})"
        if isinstance(node, TApp):
            head = node.name if node.name in ("ver",) else self.name(node.name)
            if not node.args:
                return head
            return f"({head} " + " ".join(self.term(arg) for arg in node.args) + ")"
        raise EncodingError(f"term {node} was not lowered before printing", code="UNDECLARED-SYMBOL")

    def formula(self, node: Formula) -> str:
        if isinstance(node, FConst):
            return "true" if node.value else "false"
        if isinstance(node, FEq):
            return f"(= {self.term(node.left)} {self.term(node.right)})"
        if isinstance(node, FCmp):
            left, right = self.term(node.left), self.term(node.right)
            if node.op == "!=":
                return f"(not (= {left} {right}))"
            op = BV_COMPARE[node.op] if self.int_mode == "bv" else node.op
            return f"({op} {left} {right})"
        if isinstance(node, FNot):
            return f"(not {self.formula(node.arg)})"
        if isinstance(node, FAnd):
            return "(and " + " ".join(self.formula(arg) for arg in node.args) + ")"
        if isinstance(node, FOr):
            return "(or " + " ".join(self.formula(arg) for arg in node.args) + ")"
        if isinstance(node, FImplies):
            return f"(=> {self.formula(node.left)} {self.formula(node.right)})"
        if isinstance(node, FIff):
            return f"(= {self.formula(node.left)} {self.formula(node.right)})"
        if isinstance(node, (FForall, FExists)):
            keyword = "forall" if isinstance(node, FForall) else "exists"
            binders = " ".join(f"({self.name(var.name)} {self.sort(var.sort)})" for var in node.vars)
            return f"({keyword} ({binders}) {self.formula(node.body)})"
        if isinstance(node, FMem):
            return f"(mem {self.term(node.elem)} {self.term(node.state)})"
        if isinstance(node, FApp):
            if not node.args:
                return self.name(node.name)
            return f"({self.name(node.name)} " + " ".join(self.term(arg) for arg in node.args) + ")"
        raise EncodingError(f"formula {node} was not lowered before printing", code="UNDECLARED-SYMBOL")


def emit_smtlib(
    assertions: Sequence[Formula],
    *,
    constants: Mapping[str, str] = {},
    functions: Iterable[Symbol] = (),
    fields: Mapping[str, str] = {},
    int_mode: str = "bv",
    get_model: bool = False,
    comments: Optional[Sequence[str]] = None,
) -> str:
    """A complete script: prelude, declarations, one assert per formula, check-sat."""
    printer = Printer(int_mode)
    bodies = [printer.formula(item) for item in assertions]
    lines: List[str] = [f"; {line}" for line in comments or ()]
    lines.append(f"(set-logic {LOGICS[int_mode]})")
    lines.append("(declare-sort Rec 0)")
    lines.append("(declare-sort State 0)")
    lines.append("(declare-fun mem (Rec State) Bool)")
    lines.append(f"(declare-fun ver (State) {printer.int_sort})")
    for hidden, accessor in HIDDEN_ACCESSORS.items():
        lines.append(f"(declare-fun {accessor} (Rec) {printer.sort(HIDDEN_SORTS[hidden])})")
    for name in sorted(fields):
        lines.append(f"(declare-fun |fld_{name}| (Rec) {printer.sort(fields[name])})")
    declared = sorted((printer.name(name), sort) for name, sort in constants.items())
    for printed, sort in declared:
        lines.append(f"(declare-fun {printed} () {printer.sort(sort)})")
    for symbol in functions:
        args = " ".join(printer.sort(sort) for sort in symbol.args)
        lines.append(f"(declare-fun {printer.name(symbol.name)} ({args}) {printer.sort(symbol.result)})")
    lines.extend(f"(assert {body})" for body in bodies)
    lines.append("(check-sat)")
    if get_model:
        lines.append("(get-model)")
    return "\n".join(lines) + "\n"
