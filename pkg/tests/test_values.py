from __future__ import annotations

import random

import pytest
from pydantic import ValidationError

from models.values import INT_MAX, INT_MIN, Database, Record, dom, flush, wrap_int

FLUSH_CASES = 10_000


def _random_db(rng: random.Random, ids, *, txn: int, allow_deleted: bool) -> Database:
    records = []
    for record_id in ids:
        if rng.random() < 0.5:
            continue
        records.append(
            Record.make(
                rng.choice(("t", "u")),
                id=record_id,
                txn=txn,
                deleted=allow_deleted and rng.random() < 0.3,
                values={"v": rng.randrange(4)},
            )
        )
    return Database.of(records)


def test_wrap_int_folds_into_signed_range():
    assert wrap_int(INT_MAX + 1) == INT_MIN
    assert wrap_int(INT_MIN - 1) == INT_MAX
    assert wrap_int(-5) == -5
    assert wrap_int(2 ** 33 + 7) == 7


def test_record_rejects_hidden_field_names():
    with pytest.raises(ValidationError):
        Record(id=1, table="t", fields=(("id", 3),))


def test_database_rejects_duplicate_ids():
    with pytest.raises(ValidationError):
        Database.of([Record.make("t", id=1), Record.make("u", id=1)])


def test_record_get_reads_hidden_fields():
    record = Record.make("t", id=4, txn=2, deleted=True, values={"v": 1})
    assert (record.get("id"), record.get("txn"), record.get("del"), record.get("v")) == (4, 2, True, 1)
    assert record.replace(values={"v": 3}).get("v") == 3


def test_flush_identity_cases():
    base = Database.of([Record.make("t", id=1, values={"v": 1})], version=3)
    local = Database.of([Record.make("t", id=2, txn=1), Record.make("t", id=3, txn=1, deleted=True)])
    assert flush(Database(), base) == base
    assert flush(local, Database()).records == frozenset({Record.make("t", id=2, txn=1)})


def test_flush_law_on_random_pairs():
    rng = random.Random(1729)
    for _ in range(FLUSH_CASES):
        size = rng.randint(1, 8)
        ids = range(1, size + 1)
        base = _random_db(rng, ids, txn=rng.randint(0, 2), allow_deleted=False)
        local = _random_db(rng, ids, txn=7, allow_deleted=True)
        merged = flush(local, base)
        universe = base.records | local.records
        for record in universe:
            expected = (record in local.records and not record.deleted) or (
                record in base.records and record.id not in local.dom()
            )
            assert (record in merged.records) == expected, (local, base)
        assert merged.records <= universe
        live = dom(record for record in local.records if not record.deleted)
        assert merged.dom() == (base.dom() - local.dom()) | live
