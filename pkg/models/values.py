from __future__ import annotations

import hashlib
from typing import Dict, FrozenSet, Iterable, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, StrictBool, StrictInt, model_validator

INT_BITS = 32
INT_MIN = -(2 ** (INT_BITS - 1))
INT_MAX = 2 ** (INT_BITS - 1) - 1

HIDDEN_FIELDS = ("id", "txn", "del")

Scalar = Union[StrictBool, StrictInt]


def wrap_int(value: int) -> int:
    """Fold an integer into signed fixed-width range (two's complement wraparound)."""
    span = 2 ** INT_BITS
    return ((value - INT_MIN) % span) + INT_MIN


class Record(BaseModel):
    """A row: hidden id/txn/del plus a table tag and named scalar fields."""

    model_config = ConfigDict(frozen=True)

    id: int = Field(..., ge=0, description="Unique record id")
    txn: int = Field(0, ge=0, description="Id of the transaction that last wrote the record")
    deleted: bool = Field(False, description="Deletion flag carried by local writes")
    table: str = Field(..., description="Table tag")
    fields: Tuple[Tuple[str, Scalar], ...] = ()

    @model_validator(mode="after")
    def _check_fields(self) -> "Record":
        names = [name for name, _ in self.fields]
        if names != sorted(set(names)):
            raise ValueError("Record fields must be sorted and unique.")
        if any(name in HIDDEN_FIELDS for name in names):
            raise ValueError("Hidden fields cannot be stored as ordinary fields.")
        return self

    @classmethod
    def make(
        cls,
        table: str,
        *,
        id: int,
        txn: int = 0,
        deleted: bool = False,
        values: Optional[Dict[str, Scalar]] = None,
    ) -> "Record":
        items = tuple(sorted((values or {}).items()))
        return cls(id=id, txn=txn, deleted=deleted, table=table, fields=items)

    def values(self) -> Dict[str, Scalar]:
        return dict(self.fields)

    def has(self, name: str) -> bool:
        return name in HIDDEN_FIELDS or any(key == name for key, _ in self.fields)

    def get(self, name: str) -> Scalar:
        if name == "id":
            return self.id
        if name == "txn":
            return self.txn
        if name == "del":
            return self.deleted
        for key, value in self.fields:
            if key == name:
                return value
        raise KeyError(name)

    def replace(
        self,
        *,
        id: Optional[int] = None,
        txn: Optional[int] = None,
        deleted: Optional[bool] = None,
        values: Optional[Dict[str, Scalar]] = None,
    ) -> "Record":
        merged = self.values()
        merged.update(values or {})
        return Record.make(
            self.table,
            id=self.id if id is None else id,
            txn=self.txn if txn is None else txn,
            deleted=self.deleted if deleted is None else deleted,
            values=merged,
        )

    def __str__(self) -> str:
        body = " ".join(f"{key}={_show(value)}" for key, value in self.fields)
        flags = f"id={self.id} txn={self.txn}" + (" del" if self.deleted else "")
        return f"<{self.table} {flags}{' ' + body if body else ''}>"


def _show(value: Scalar) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def dom(records: Iterable[Record]) -> FrozenSet[int]:
    return frozenset(record.id for record in records)


class Database(BaseModel):
    """A finite set of records with unique ids, stamped with a commit version."""

    model_config = ConfigDict(frozen=True)

    records: FrozenSet[Record] = frozenset()
    version: int = Field(0, ge=0, description="Number of record-changing commits seen")

    @model_validator(mode="after")
    def _check_unique_ids(self) -> "Database":
        if len(dom(self.records)) != len(self.records):
            raise ValueError("Record ids must be unique within a database.")
        return self

    @classmethod
    def of(cls, records: Iterable[Record], *, version: int = 0) -> "Database":
        return cls(records=frozenset(records), version=version)

    def rows(self) -> Tuple[Record, ...]:
        return tuple(sorted(self.records, key=lambda record: record.id))

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, record: object) -> bool:
        return record in self.records

    def dom(self) -> FrozenSet[int]:
        return dom(self.records)

    def by_id(self, record_id: int) -> Optional[Record]:
        for record in self.records:
            if record.id == record_id:
                return record
        return None

    def table(self, name: str) -> FrozenSet[Record]:
        return frozenset(record for record in self.records if record.table == name)

    def max_id(self) -> int:
        return max(self.dom(), default=0)

    def bumped(self) -> "Database":
        return Database(records=self.records, version=self.version + 1)

    def digest(self) -> str:
        text = ";".join(str(record) for record in self.rows())
        return hashlib.sha1(f"{self.version}|{text}".encode("utf-8")).hexdigest()[:10]


def flush(delta: Database, base: Database) -> Database:
    """Merge a local database into a global one.

    A record survives when its id is not written by ``delta`` and it is in
    ``base``, or when it is a non-deleted record of ``delta``.
    """
    written = delta.dom()
    kept = {record for record in base.records if record.id not in written}
    kept.update(record for record in delta.records if not record.deleted)
    return Database(records=frozenset(kept), version=base.version)
