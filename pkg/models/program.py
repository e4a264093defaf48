from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from models.command import Command, Delete, Insert, Update, walk
from models.expr import RecordLit, Var, With
from models.logic import Formula, TRUE, conj
from models.values import Database

FieldType = Literal["int", "bool"]
ParamKind = Literal["int", "bool", "set", "record"]


class FieldDecl(BaseModel):
    name: str = Field(..., description="Field name, unique per type across tables.")
    type: FieldType = Field("int", description="Scalar type of the field.")
    key: bool = Field(False, description="Part of the table key; key fields are never written and the table never grows or shrinks.")


class TableDecl(BaseModel):
    name: str = Field(..., description="Table tag.", json_schema_extra={"example": "district"})
    fields: List[FieldDecl] = Field(default_factory=list)

    def field_names(self) -> List[str]:
        return [item.name for item in self.fields]

    def key_fields(self) -> Tuple[str, ...]:
        return tuple(item.name for item in self.fields if item.key)


class ParamDecl(BaseModel):
    name: str
    kind: ParamKind = "int"
    table: Optional[str] = Field(None, description="Record type of set and record parameters.")


class TxnDecl(BaseModel):
    """A named transaction body with its formal parameters."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    params: List[ParamDecl] = Field(default_factory=list)
    body: Command


class NamedFormula(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    formula: Formula


class Guarantee(BaseModel):
    """Relation over ``D`` and ``D'`` promised by every commit of ``txn``."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    txn: str
    formula: Formula
    writes: Optional[List[str]] = Field(
        None,
        description="Tables the transaction may change; every other table is framed.",
    )


class RunInstance(BaseModel):
    instance: str = Field(..., description="Instance label used in traces.")
    txn: str
    args: Dict[str, Any] = Field(default_factory=dict)


class ProgramSpec(BaseModel):
    """A parsed program: schema, transactions, invariants, guarantees and fixtures."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str = "program"
    store: Optional[str] = None
    tables: Dict[str, TableDecl] = Field(default_factory=dict)
    transactions: List[TxnDecl] = Field(default_factory=list)
    invariants: List[NamedFormula] = Field(default_factory=list)
    checks: List[NamedFormula] = Field(
        default_factory=list,
        description="Conditions checked by the explorer only; they may use set functions the verifier axiomatizes imprecisely.",
    )
    guarantees: Dict[str, Guarantee] = Field(default_factory=dict)
    database: Database = Field(default_factory=Database)
    runs: List[RunInstance] = Field(default_factory=list)
    expectations: Dict[str, Dict[str, str]] = Field(default_factory=dict)

    def txn(self, name: str) -> TxnDecl:
        for decl in self.transactions:
            if decl.name == name:
                return decl
        raise KeyError(name)

    def txn_id(self, name: str) -> int:
        for index, decl in enumerate(self.transactions, start=1):
            if decl.name == name:
                return index
        raise KeyError(name)

    def txn_names(self) -> List[str]:
        return [decl.name for decl in self.transactions]

    def invariant(self) -> Formula:
        if not self.invariants:
            return TRUE
        return conj(*(item.formula for item in self.invariants))

    def field_sorts(self) -> Dict[str, str]:
        sorts: Dict[str, str] = {}
        for table in self.tables.values():
            for item in table.fields:
                sorts[item.name] = item.type
        return sorts

    def table_fields(self, table: str) -> List[str]:
        return self.tables[table].field_names()

    def table_names(self) -> Tuple[str, ...]:
        return tuple(sorted(self.tables))

    def keys(self) -> Dict[str, Tuple[str, ...]]:
        return {name: table.key_fields() for name, table in sorted(self.tables.items()) if table.key_fields()}

    def stable_keys(self) -> Dict[str, Tuple[str, ...]]:
        """Declared keys of the tables whose records no transaction creates, removes or re-keys."""
        keys = self.keys()
        for decl in self.transactions:
            for command in walk(decl.body):
                if isinstance(command, Delete):
                    keys.pop(command.table, None)
                elif isinstance(command, Insert):
                    if isinstance(command.value, RecordLit):
                        keys.pop(command.value.table, None)
                    else:
                        keys.clear()
                elif isinstance(command, Update) and command.table in keys:
                    value = command.value
                    written = {name for name, _ in value.updates} if isinstance(value, With) and value.base == Var(command.var) else None
                    if written is None or written & set(keys[command.table]):
                        keys.pop(command.table)
        return keys

    def conditions(self) -> List[NamedFormula]:
        """Everything the explorer checks after a commit."""
        return list(self.invariants) + list(self.checks)
