from __future__ import annotations

import itertools

import pytest

from models.errors import UnknownSpecError, UnknownStoreError
from models.ground import holds, universe_of
from models.logic import TRUE
from models.values import Database, Record
from services.isolation_specs import (
    ATOMS,
    CUR,
    DELTA,
    SNAP,
    Atom,
    build_rely,
    builtin_spec,
    canonical_level,
    check_spec_stability,
    disciplined_step,
    exec_id,
    exec_ro,
    exec_ss,
    exec_ww,
    rely_modulo,
    spec_stability_queries,
    stable_by_enumeration,
    store_lattice,
)
from services.prover import Prover

OLD = Record.make("t", id=1, txn=1, values={"v": 1})
NEW = Record.make("t", id=1, txn=2, values={"v": 2})
OTHER = Record.make("t", id=2, txn=2, values={"v": 0})


@pytest.mark.parametrize(
    "name, on_step, on_commit",
    [
        ("rc", "true", "true"),
        ("MAV", "true", "true"),
        ("rr-ansi", "rr", "true"),
        ("rr_snapshot", "ss", "true"),
        ("si", "ss", "ww"),
        ("SER", "ss", "ss"),
    ],
)
def test_builtin_levels(name, on_step, on_commit):
    spec = builtin_spec(name)
    assert (spec.on_step.name, spec.on_commit.name) == (on_step, on_commit)
    assert spec.name == canonical_level(name)


def test_unknown_names_are_rejected():
    with pytest.raises(UnknownSpecError):
        builtin_spec("snapshot-ish")
    with pytest.raises(UnknownStoreError):
        store_lattice("oracle")


def test_store_lattices_are_ordered_weakest_first():
    assert store_lattice("postgres").levels == ("RC", "SI", "SER")
    assert store_lattice("MySQL").levels == ("RC", "RR_SNAPSHOT", "SER")
    assert store_lattice("mysql").strongest == "SER"


def test_exec_atoms_on_small_states():
    delta = Database.of([NEW])
    snap = Database.of([OLD])
    assert exec_ss(delta, snap, Database.of([OLD]))
    assert not exec_ss(delta, snap, Database.of([OLD], version=1))
    assert exec_ww(delta, snap, Database.of([OLD, OTHER]))
    assert not exec_ww(delta, snap, Database.of([NEW]))
    assert exec_id(delta, snap, Database.of([NEW]))
    assert not exec_id(Database.of([OTHER]), snap, Database.of([OTHER]))
    assert exec_ro(Database(), snap, snap)
    assert not exec_ro(delta, snap, snap)


def test_disciplined_step_requires_a_fresh_writer():
    snap = Database.of([OLD])
    mid = Database.of([OLD], version=1)
    fresh = Database.of([OLD, Record.make("t", id=3, txn=5)], version=2)
    stale = Database.of([OLD, Record.make("t", id=3, txn=1)], version=2)
    assert disciplined_step(Database(), snap, mid, fresh)
    assert not disciplined_step(Database(), snap, mid, stale)
    assert disciplined_step(Database(), snap, mid, mid)


@pytest.mark.parametrize("name", ["ss", "ww", "id", "ro"])
def test_builtin_atoms_are_stable_by_enumeration(name):
    assert stable_by_enumeration(ATOMS[name])


def test_enumeration_finds_unstable_predicates():
    grows = Atom("grows", lambda delta, snap, cur: len(cur.records) >= len(snap.records), lambda: TRUE)
    assert not stable_by_enumeration(grows)


def test_rely_has_one_disjunct_per_guarantee(courseware):
    rely = build_rely(courseware)
    assert sorted(item.txn for item in rely.disjuncts) == sorted(courseware.guarantees)
    enroll = next(item for item in rely.disjuncts if item.txn == "enroll")
    assert "student" not in enroll.writes
    assert rely.writes_any(["enrollment"])
    assert len(list(spec_stability_queries(rely, ATOMS["ww"]))) == len(rely.disjuncts)


def test_rely_modulo_ss_is_identity(bank):
    rely = build_rely(bank)
    assert rely_modulo(rely, ATOMS["ss"]).is_identity
    assert not rely_modulo(rely, ATOMS["true"]).is_identity


@pytest.mark.solver
@pytest.mark.parametrize("name", ["ss", "ww", "id", "ro"])
def test_spec_stability_is_proved(bank, solver_config, name):
    prover = Prover.for_program(bank, solver_config)
    assert check_spec_stability(build_rely(bank), ATOMS[name], prover)


def _ground_states():
    slots = [(None, OLD, NEW), (None, OTHER)]
    for combo in itertools.product(*slots):
        records = [record for record in combo if record is not None]
        for version in (0, 1):
            yield Database.of(records, version=version)


GROUND = list(_ground_states())
TRIPLES = [(delta, snap, cur) for delta in GROUND if delta.version == 0 for snap in GROUND for cur in GROUND]


@pytest.mark.parametrize("name", ["ss", "ww", "id", "ro", "rr"])
def test_exec_and_symbolic_atoms_agree_on_ground_states(name):
    atom = ATOMS[name]
    formula = atom.formula()
    for delta, snap, cur in TRIPLES:
        env = {DELTA: delta.records, SNAP: snap, CUR: cur}
        expected = atom.run(delta, snap, cur)
        assert holds(formula, env, universe=universe_of(delta, snap, cur)) == expected, (delta, snap, cur)


@pytest.mark.parametrize("levels", [store_lattice("postgres").levels, store_lattice("mysql").levels, ("RC", "RR_ANSI", "RR_SNAPSHOT")])
def test_stronger_levels_admit_less(levels):
    for weaker, stronger in zip(levels, levels[1:]):
        low, high = builtin_spec(weaker), builtin_spec(stronger)
        for delta, snap, cur in TRIPLES:
            if high.exec_e(delta, snap, cur):
                assert low.exec_e(delta, snap, cur), (weaker, stronger, delta, snap, cur)
            if high.exec_c(delta, snap, cur):
                assert low.exec_c(delta, snap, cur), (weaker, stronger, delta, snap, cur)
