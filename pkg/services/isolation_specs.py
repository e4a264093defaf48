"""Isolation specifications in executable and symbolic form, store lattices and relies."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

from models.errors import UnknownSpecError, UnknownStoreError
from models.logic import (
    FEq,
    FCmp,
    FHasTable,
    FIff,
    FIn,
    FSetEq,
    Formula,
    SetExpr,
    SVar,
    TField,
    TRUE,
    TVar,
    TVer,
    conj,
    disj,
    exists,
    forall,
    free_vars,
    fresh_name,
    implies,
    iter_children,
    map_children,
    neg,
    Node,
    subst,
    TFresh,
)
from models.program import Guarantee, ProgramSpec
from models.values import Database, Record

logger = logging.getLogger(__name__)

DELTA = "delta"
SNAP = "D"
CUR = "D'"

ExecPredicate = Callable[[Database, Database, Database], bool]


def _state(name: str) -> TVar:
    return TVar(name, "state")


# --- executable atoms -------------------------------------------------------


def exec_true(delta: Database, snap: Database, cur: Database) -> bool:
    return True


def exec_ss(delta: Database, snap: Database, cur: Database) -> bool:
    return cur == snap


def exec_ww(delta: Database, snap: Database, cur: Database) -> bool:
    written = delta.dom()
    return all(record in cur.records for record in snap.records if record.id in written)


def exec_id(delta: Database, snap: Database, cur: Database) -> bool:
    before, after = snap.dom(), cur.dom()
    return all(record.id in before or record.id not in after for record in delta.records)


def exec_ro(delta: Database, snap: Database, cur: Database) -> bool:
    return not delta.records


def exec_rr(delta: Database, snap: Database, cur: Database) -> bool:
    return all(record in cur.records for record in delta.records if record in snap.records)


# --- symbolic atoms ---------------------------------------------------------


def _rid(var: TVar) -> TField:
    return TField(var, "id")


def sym_ss() -> Formula:
    return conj(
        FSetEq(SVar(CUR), SVar(SNAP)),
        FEq(TVer(_state(CUR)), TVer(_state(SNAP))),
    )


def sym_ww() -> Formula:
    written, old = TVar("rw"), TVar("r")
    return forall(
        (written, old),
        implies(
            conj(FIn(written, SVar(DELTA)), FIn(old, SVar(SNAP)), FEq(_rid(old), _rid(written))),
            FIn(old, SVar(CUR)),
        ),
    )


def sym_id() -> Formula:
    written, later, earlier = TVar("rw"), TVar("r2"), TVar("r1")
    return forall(
        (written, later),
        implies(
            conj(FIn(written, SVar(DELTA)), FIn(later, SVar(CUR)), FEq(_rid(later), _rid(written))),
            exists((earlier,), conj(FIn(earlier, SVar(SNAP)), FEq(_rid(earlier), _rid(written)))),
        ),
    )


def sym_ro() -> Formula:
    var = TVar("x")
    return forall((var,), neg(FIn(var, SVar(DELTA))))


def sym_rr() -> Formula:
    var = TVar("r")
    return forall(
        (var,),
        implies(conj(FIn(var, SVar(DELTA)), FIn(var, SVar(SNAP))), FIn(var, SVar(CUR))),
    )


@dataclass(frozen=True)
class Atom:
    name: str
    run: ExecPredicate
    formula: Callable[[], Formula]


ATOMS: Dict[str, Atom] = {
    "true": Atom("true", exec_true, lambda: TRUE),
    "ss": Atom("ss", exec_ss, sym_ss),
    "ww": Atom("ww", exec_ww, sym_ww),
    "id": Atom("id", exec_id, sym_id),
    "ro": Atom("ro", exec_ro, sym_ro),
    "rr": Atom("rr", exec_rr, sym_rr),
}


@dataclass(frozen=True)
class IsolationSpec:
    """A pair of tri-state predicates over (δ, Δ, Δ′): during execution and at commit."""

    name: str
    on_step: Atom
    on_commit: Atom

    def exec_e(self, delta: Database, snap: Database, cur: Database) -> bool:
        return self.on_step.run(delta, snap, cur)

    def exec_c(self, delta: Database, snap: Database, cur: Database) -> bool:
        return self.on_commit.run(delta, snap, cur)

    @property
    def sym_e(self) -> Formula:
        return self.on_step.formula()

    @property
    def sym_c(self) -> Formula:
        return self.on_commit.formula()

    @property
    def cli_name(self) -> str:
        return self.name.lower().replace("_", "-")


LEVELS: Dict[str, Tuple[str, str]] = {
    "RC": ("true", "true"),
    "MAV": ("true", "true"),
    "RR_ANSI": ("rr", "true"),
    "RR_SNAPSHOT": ("ss", "true"),
    "SI": ("ss", "ww"),
    "SER": ("ss", "ss"),
}

STORE_LATTICES: Dict[str, Tuple[str, ...]] = {
    "postgres": ("RC", "SI", "SER"),
    "mysql": ("RC", "RR_SNAPSHOT", "SER"),
}


def canonical_level(name: str) -> str:
    key = name.strip().upper().replace("-", "_")
    if key in LEVELS:
        return key
    if name.strip().lower() in ATOMS:
        return name.strip().lower()
    raise UnknownSpecError(f"unknown isolation level {name!r}")


def builtin_spec(name: str) -> IsolationSpec:
    key = canonical_level(name)
    if key in LEVELS:
        step, commit = LEVELS[key]
        return IsolationSpec(key, ATOMS[step], ATOMS[commit])
    return IsolationSpec(key, ATOMS[key], ATOMS[key])


@dataclass(frozen=True)
class StoreLattice:
    store: str
    levels: Tuple[str, ...]

    def specs(self) -> List[IsolationSpec]:
        return [builtin_spec(level) for level in self.levels]

    @property
    def strongest(self) -> str:
        return self.levels[-1]


def store_lattice(store: str) -> StoreLattice:
    key = store.strip().lower()
    if key not in STORE_LATTICES:
        raise UnknownStoreError(f"unknown store {store!r}; expected one of {', '.join(sorted(STORE_LATTICES))}")
    return StoreLattice(key, STORE_LATTICES[key])


def apply_spec(formula: Formula, delta: SetExpr, snap: str, cur: str) -> Formula:
    """Instantiate an isolation formula at a local set and two named states."""
    return subst(formula, {DELTA: delta, SNAP: SVar(snap), CUR: SVar(cur)})  # type: ignore[return-value]


# --- relies -----------------------------------------------------------------


@dataclass(frozen=True)
class RelyDisjunct:
    """One guarantee, instantiated with fresh parameter names."""

    txn: str
    formula: Formula
    writes: Optional[Tuple[str, ...]] = None
    tables: Tuple[str, ...] = ()
    keyed: Tuple[str, ...] = ()

    def step(self, pre: str, post: str, earlier: Sequence[str] = (), local: Optional[SetExpr] = None) -> Formula:
        """The commit of another transaction moving ``pre`` to ``post``.

        Besides the guarantee and its frame, the commit bears a fresh
        transaction id absent from every earlier state, strictly advances
        the version, and reuses an id of an earlier state (or of ``local``)
        only to overwrite a record still present in ``pre``.
        """
        body = subst(self.formula, {SNAP: SVar(pre), CUR: SVar(post)})
        txn = TVar(fresh_name("t"), "int")
        parts: List[Formula] = [body, FCmp("<", TVer(_state(pre)), TVer(_state(post)))]
        parts.extend(self.frame(pre, post))
        x = TVar(fresh_name("x"))
        written = conj(FIn(x, SVar(post)), neg(FIn(x, SVar(pre))))
        parts.append(forall((x,), implies(written, FEq(TField(x, "txn"), txn))))
        for state in (pre, *earlier):
            y = TVar(fresh_name("y"))
            parts.append(forall((y,), implies(FIn(y, SVar(state)), neg(FEq(TField(y, "txn"), txn)))))
        sources: List[SetExpr] = [SVar(state) for state in earlier]
        if local is not None:
            sources.append(local)
        for source in sources:
            x, z, y = TVar(fresh_name("x")), TVar(fresh_name("z")), TVar(fresh_name("y"))
            reused = conj(FIn(x, SVar(post)), neg(FIn(x, SVar(pre))), FIn(z, source), FEq(_rid(z), _rid(x)))
            kept = exists((y,), conj(FIn(y, SVar(pre)), FEq(_rid(y), _rid(x))))
            parts.append(forall((x, z), implies(reused, kept)))
        parts.extend(self.population(pre, post))
        return conj(*parts)  # type: ignore[arg-type]

    def population(self, pre: str, post: str) -> List[Formula]:
        """Keyed tables keep their set of ids."""
        out: List[Formula] = []
        for table in self.keyed:
            for source, target in ((post, pre), (pre, post)):
                x, y = TVar(fresh_name("x")), TVar(fresh_name("y"))
                present = exists((y,), conj(FIn(y, SVar(target)), FEq(_rid(y), _rid(x))))
                out.append(forall((x,), implies(conj(FIn(x, SVar(source)), FHasTable(x, table)), present)))
        return out

    def frame(self, pre: str, post: str) -> List[Formula]:
        if self.writes is None:
            return []
        out: List[Formula] = []
        for table in self.tables:
            if table in self.writes:
                continue
            x = TVar(fresh_name("x"))
            out.append(forall((x,), implies(FHasTable(x, table), FIff(FIn(x, SVar(pre)), FIn(x, SVar(post))))))
        return out


def identity_step(pre: str, post: str) -> Formula:
    return conj(FSetEq(SVar(post), SVar(pre)), FEq(TVer(_state(post)), TVer(_state(pre))))


@dataclass(frozen=True)
class Rely:
    """Identity plus the union of the program's guarantees."""

    disjuncts: Tuple[RelyDisjunct, ...] = ()

    def relation(self, pre: str, post: str) -> Formula:
        return disj(identity_step(pre, post), *(item.step(pre, post) for item in self.disjuncts))

    def writes_any(self, tables: Sequence[str]) -> bool:
        wanted = set(tables)
        for item in self.disjuncts:
            if item.writes is None or wanted & set(item.writes):
                return True
        return False


def build_rely(program: ProgramSpec, guarantees: Optional[Dict[str, Guarantee]] = None) -> Rely:
    """One disjunct per guarantee, parameters renamed apart and insertion sites made private."""
    tables = program.table_names()
    keyed = tuple(program.stable_keys())
    guarantees = program.guarantees if guarantees is None else guarantees
    disjuncts: List[RelyDisjunct] = []
    for decl in program.transactions:
        guarantee = guarantees.get(decl.name)
        if guarantee is None:
            continue
        params = sorted(free_vars(guarantee.formula) - {SNAP, CUR})
        renamed = {name: _fresh_param(guarantee.formula, name) for name in params}
        formula = subst(guarantee.formula, renamed) if renamed else guarantee.formula
        formula = rename_sites(formula, fresh_name("other"))
        writes = tuple(guarantee.writes) if guarantee.writes is not None else None
        disjuncts.append(RelyDisjunct(decl.name, formula, writes, tables, keyed))  # type: ignore[arg-type]
    return Rely(tuple(disjuncts))


def rename_sites(node: Node, tag: str) -> Node:
    """Give every insertion site in ``node`` a name private to ``tag``."""
    if isinstance(node, TFresh):
        return TFresh(f"{node.site}@{tag}", tuple(rename_sites(arg, tag) for arg in node.args))  # type: ignore[misc]
    return map_children(node, lambda child: rename_sites(child, tag))


def _fresh_param(formula: Formula, name: str):
    sort = _sort_of(formula, name)
    if sort == "state":
        return SVar(fresh_name(name))
    return TVar(fresh_name(name), sort)


def _sort_of(node, name: str) -> str:
    if isinstance(node, TVar) and node.name == name:
        return node.sort
    if isinstance(node, SVar) and node.name == name:
        return "state"
    for child in iter_children(node):
        found = _sort_of(child, name)
        if found:
            return found
    return ""


@dataclass(frozen=True)
class ConstrainedRely:
    """R modulo 𝕀: interference admitted by the rely and the isolation predicate."""

    rely: Rely
    iso: Atom

    @property
    def is_identity(self) -> bool:
        return self.iso.name == "ss" or not self.rely.disjuncts

    def relation(self, disjunct: RelyDisjunct, delta: SetExpr, pre: str, post: str) -> Formula:
        return conj(disjunct.step(pre, post), apply_spec(self.iso.formula(), delta, pre, post))


def rely_modulo(rely: Rely, iso: Atom) -> ConstrainedRely:
    return ConstrainedRely(rely, iso)


# --- stability of isolation predicates --------------------------------------


def spec_stability_queries(rely: Rely, atom: Atom) -> Iterator[Tuple[str, List[Formula], Formula]]:
    """Validity obligations for stable(R, 𝕀), one per non-identity rely disjunct.

    Identity steps are skipped: every builtin atom is reflexive in its last
    two arguments and respects state equality.
    """
    delta = SVar(DELTA)
    sym = atom.formula()
    for item in rely.disjuncts:
        hypotheses = [
            apply_spec(sym, delta, "D", "D2"),
            item.step("D1", "D2", earlier=("D",), local=delta),
            FCmp("<=", TVer(_state("D")), TVer(_state("D1"))),
            apply_spec(sym_id(), delta, "D", "D1"),
            apply_spec(sym_id(), delta, "D", "D2"),
        ]
        goal = conj(apply_spec(sym, delta, "D", "D1"), apply_spec(sym, delta, "D1", "D2"))
        yield f"stable-{atom.name}-{item.txn}", hypotheses, goal


def check_spec_stability(rely: Rely, atom: Atom, prover) -> bool:
    if atom.name == "true":
        logger.debug("spec stability of %s: vacuous", atom.name)
        return True
    for label, hypotheses, goal in spec_stability_queries(rely, atom):
        if not prover.valid(hypotheses, goal, label=label):
            logger.info("isolation predicate %s is not stable (%s)", atom.name, label)
            return False
    return True


# --- ground corroboration ---------------------------------------------------


def _small_databases(records: Sequence[Record]) -> List[frozenset]:
    by_id: Dict[int, List[Record]] = {}
    for record in records:
        by_id.setdefault(record.id, []).append(record)
    choices = [[None, *group] for group in by_id.values()]
    out = []
    for combo in itertools.product(*choices):
        out.append(frozenset(record for record in combo if record is not None))
    return out


def disciplined_step(delta: Database, snap: Database, mid: Database, post: Database) -> bool:
    """Ground counterpart of :meth:`RelyDisjunct.step` plus the background facts."""
    if snap.version > mid.version:
        return False
    if not (exec_id(delta, snap, mid) and exec_id(delta, snap, post)):
        return False
    if post.records == mid.records and post.version == mid.version:
        return True
    if post.version <= mid.version:
        return False
    new = post.records - mid.records
    txns = {record.txn for record in new}
    if len(txns) > 1:
        return False
    old_txns = {record.txn for record in snap.records | mid.records}
    if txns & old_txns:
        return False
    guarded = snap.dom() | delta.dom()
    return all(record.id in mid.dom() for record in new if record.id in guarded)


def stable_by_enumeration(atom: Atom, *, ids: Sequence[int] = (1, 2), txns: Sequence[int] = (1, 2)) -> bool:
    """Exhaustively check stable(R, 𝕀) against every disciplined step over a tiny universe."""
    shared = [Record.make("t", id=i, txn=t) for i in ids for t in txns]
    local = [Record.make("t", id=i, txn=9, deleted=flag) for i in ids for flag in (False, True)]
    deltas = [Database(records=records) for records in _small_databases(local)]
    states = _small_databases(shared)
    for delta in deltas:
        for snap_records in states:
            snap = Database(records=snap_records)
            for mid_records in states:
                for mid_version in (0, 1):
                    mid = Database(records=mid_records, version=mid_version)
                    for post in _successors(mid, states):
                        if not disciplined_step(delta, snap, mid, post):
                            continue
                        if atom.run(delta, snap, post) and not (atom.run(delta, snap, mid) and atom.run(delta, mid, post)):
                            logger.debug("counterexample for %s: %s %s %s %s", atom.name, delta, snap, mid, post)
                            return False
    return True


def _successors(mid: Database, states: Sequence[frozenset]) -> Iterator[Database]:
    yield mid
    for records in states:
        yield Database(records=records, version=mid.version + 1)
