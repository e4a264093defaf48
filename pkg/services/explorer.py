"""Executable small-step semantics and a bounded interleaving explorer."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from models.command import (
    Command,
    Delete,
    Foreach,
    ForeachRun,
    If,
    Insert,
    Let,
    Par,
    Select,
    Seq,
    Skip,
    Txn,
    TxnRun,
    Update,
    bind_params,
    subst_command,
)
from models.errors import AcidifyError, EvalError, LocalContextViolation
from models.expr import eval_expr
from models.ground import holds
from models.program import ProgramSpec
from models.results import Trace, TraceStep, Verdict
from models.values import Database, Record, flush
from services.isolation_specs import IsolationSpec, builtin_spec
from utils.config import ExplorerOptions

logger = logging.getLogger(__name__)

Invariant = Callable[[Database], bool]


class IdSource:
    """Global monotone counter for fresh record ids."""

    def __init__(self, first: int):
        self.next = first

    def take(self) -> int:
        value = self.next
        self.next += 1
        return value


@dataclass(frozen=True)
class LocalConfig:
    txn_id: int
    command: Command
    delta: Database


@dataclass(frozen=True)
class TopConfig:
    branches: Tuple[Command, ...]
    delta: Database
    next_id: int

    @property
    def finished(self) -> bool:
        return all(isinstance(branch, Skip) for branch in self.branches)


@dataclass(frozen=True)
class Move:
    """One top-level successor together with the label of the rule that produced it."""

    config: TopConfig
    actor: str
    rule: str
    committed: bool = False


def _item_key(item: Any) -> Tuple[Any, ...]:
    if isinstance(item, Record):
        return (0, item.id, item.table, item.fields)
    return (1, item)


def _own_writes(delta: Database, txn_id: int) -> Database:
    return Database(records=frozenset(record for record in delta.records if record.txn == txn_id))


def _matching(source: Database, var: str, table: str, cond, env: Mapping[str, Any] = {}) -> FrozenSet[Record]:
    out = set()
    for record in source.records:
        if record.table != table:
            continue
        scope = dict(env)
        scope[var] = record
        keep = eval_expr(cond, scope)
        if not isinstance(keep, bool):
            raise EvalError(f"condition {cond} is not boolean", code="TYPE-MISMATCH")
        if keep:
            out.add(record)
    return frozenset(out)


def _check_independent(delta: Database, txn_id: int, targets: FrozenSet[Record], command: Command) -> None:
    own = {record.id for record in delta.records if record.txn == txn_id}
    clash = own & {record.id for record in targets}
    if clash:
        raise LocalContextViolation(f"transaction {txn_id} rewrites its own uncommitted records {sorted(clash)} in {command}")


def _with_records(delta: Database, records: Iterable[Record]) -> Database:
    """Add records to the local database, replacing tracked reads of the same ids."""
    fresh = list(records)
    ids = {record.id for record in fresh}
    kept = [record for record in delta.records if record.id not in ids]
    return Database(records=frozenset(kept + fresh))


def local_step(
    snapshot: Database,
    cfg: LocalConfig,
    ids: IdSource,
    options: Optional[ExplorerOptions] = None,
) -> List[Tuple[LocalConfig, str]]:
    """All one-step reducts of a transaction body; more than one only with ``all_orders``."""
    options = options or ExplorerOptions()
    return [
        (LocalConfig(cfg.txn_id, command, delta), rule)
        for command, delta, rule in _step(cfg.command, cfg.delta, cfg.txn_id, snapshot, ids, options)
    ]


def _read_view(delta: Database, txn_id: int, snapshot: Database, options: ExplorerOptions) -> Database:
    if options.reads_own_writes:
        return flush(_own_writes(delta, txn_id), snapshot)
    return snapshot


def _step(
    command: Command,
    delta: Database,
    txn_id: int,
    snapshot: Database,
    ids: IdSource,
    options: ExplorerOptions,
) -> List[Tuple[Command, Database, str]]:
    if isinstance(command, Skip):
        return []
    if isinstance(command, Let):
        value = eval_expr(command.value, {})
        return [(subst_command(command.body, command.name, value), delta, "E-Let")]
    if isinstance(command, If):
        cond = eval_expr(command.cond, {})
        if not isinstance(cond, bool):
            raise EvalError(f"condition {command.cond} is not boolean", code="TYPE-MISMATCH")
        return [(command.then if cond else command.else_, delta, "E-If")]
    if isinstance(command, Seq):
        out = []
        for first, new_delta, rule in _step(command.first, delta, txn_id, snapshot, ids, options):
            rest = command.second if isinstance(first, Skip) else Seq(first, command.second)
            out.append((rest, new_delta, rule))
        return out
    if isinstance(command, Insert):
        value = eval_expr(command.value, {})
        if not isinstance(value, Record):
            raise EvalError(f"INSERT expects a record, got {value!r}", code="TYPE-MISMATCH")
        record = value.replace(id=ids.take(), txn=txn_id, deleted=False)
        return [(Skip(), _with_records(delta, [record]), "E-Insert")]
    view = _read_view(delta, txn_id, snapshot, options)
    if isinstance(command, Delete):
        targets = _matching(view, command.var, command.table, command.cond)
        _check_independent(delta, txn_id, targets, command)
        written = [record.replace(txn=txn_id, deleted=True) for record in targets]
        return [(Skip(), _with_records(delta, written), "E-Delete")]
    if isinstance(command, Update):
        targets = _matching(view, command.var, command.table, command.cond)
        _check_independent(delta, txn_id, targets, command)
        written = []
        for record in targets:
            value = eval_expr(command.value, {command.var: record})
            if not isinstance(value, Record):
                raise EvalError(f"UPDATE expects a record, got {value!r}", code="TYPE-MISMATCH")
            written.append(value.replace(id=record.id, txn=txn_id, deleted=record.deleted))
        return [(Skip(), _with_records(delta, written), "E-Update")]
    if isinstance(command, Select):
        found = _matching(view, command.var, command.table, command.cond)
        if command.single:
            if not found:
                raise EvalError(f"select1 over {command.table} matched nothing", code="EMPTY-SELECT1")
            value: Any = min(found, key=lambda record: record.id)
        else:
            value = found
        new_delta = delta
        if options.track_reads:
            tracked = [record for record in found if record.id not in delta.dom()]
            new_delta = Database(records=delta.records | frozenset(tracked))
        return [(subst_command(command.body, command.target, value), new_delta, "E-Select")]
    if isinstance(command, Foreach):
        items = eval_expr(command.source, {})
        if not isinstance(items, frozenset):
            raise EvalError(f"FOREACH expects a set, got {items!r}", code="TYPE-MISMATCH")
        run = ForeachRun(frozenset(), items, command.done_var, command.item_var, command.body)
        return [(run, delta, "E-Foreach1")]
    if isinstance(command, ForeachRun):
        if not command.pending:
            return [(Skip(), delta, "E-Foreach3")]
        ordered = sorted(command.pending, key=_item_key)
        picks = ordered if options.all_orders else ordered[:1]
        out = []
        for item in picks:
            body = subst_command(command.body, command.done_var, command.done)
            body = subst_command(body, command.item_var, item)
            rest = ForeachRun(
                command.done | {item},
                command.pending - {item},
                command.done_var,
                command.item_var,
                command.body,
            )
            out.append((Seq(body, rest), delta, "E-Foreach2"))
        return out
    raise EvalError(f"cannot step {command!r}", code="TYPE-MISMATCH")


# --- top level --------------------------------------------------------------


SpecOf = Callable[[TxnRun], IsolationSpec]


def default_spec_of(branch: TxnRun) -> IsolationSpec:
    return builtin_spec(branch.level)


def _instance(branch: Command) -> str:
    if isinstance(branch, (Txn, TxnRun)):
        return branch.name
    return "skip"


def top_step(
    cfg: TopConfig,
    spec_of: SpecOf = default_spec_of,
    options: Optional[ExplorerOptions] = None,
) -> List[Move]:
    """Every successor of ``cfg`` by one rule at any enabled position.

    A running transaction steps only while its execution-time spec admits
    the interference since its snapshot, reading and re-snapshotting the
    current global state. Commits are gated by the commit-time spec.
    Blocked transactions contribute no successors.
    """
    options = options or ExplorerOptions()
    moves: List[Move] = []
    for index, branch in enumerate(cfg.branches):
        if isinstance(branch, Txn):
            started = TxnRun(branch.txn_id, branch.name, branch.level, branch.body, Database(), cfg.delta)
            moves.append(Move(_replace(cfg, index, started), branch.name, "E-Txn-Start"))
        elif isinstance(branch, TxnRun):
            spec = spec_of(branch)
            if isinstance(branch.body, Skip):
                if not spec.exec_c(branch.delta, branch.snapshot, cfg.delta):
                    continue
                merged = flush(_own_writes(branch.delta, branch.txn_id), cfg.delta)
                if merged.records != cfg.delta.records:
                    merged = Database(records=merged.records, version=cfg.delta.version + 1)
                moved = TopConfig(_swap(cfg.branches, index, Skip()), merged, cfg.next_id)
                moves.append(Move(moved, f"commit({branch.name})", "E-Commit", committed=True))
                continue
            if not spec.exec_e(branch.delta, branch.snapshot, cfg.delta):
                continue
            view = cfg.delta
            ids = IdSource(cfg.next_id)
            local = LocalConfig(branch.txn_id, branch.body, branch.delta)
            for reduct, rule in local_step(view, local, ids, options):
                stepped = TxnRun(branch.txn_id, branch.name, branch.level, reduct.command, reduct.delta, view)
                moved = TopConfig(_swap(cfg.branches, index, stepped), cfg.delta, ids.next)
                moves.append(Move(moved, branch.name, rule))
    return moves


def _swap(branches: Tuple[Command, ...], index: int, branch: Command) -> Tuple[Command, ...]:
    return branches[:index] + (branch,) + branches[index + 1 :]


def _replace(cfg: TopConfig, index: int, branch: Command) -> TopConfig:
    return TopConfig(_swap(cfg.branches, index, branch), cfg.delta, cfg.next_id)


def initial_config(program: Command, delta0: Database) -> TopConfig:
    branches = program.branches if isinstance(program, Par) else (program,)
    return TopConfig(tuple(branches), delta0, delta0.max_id() + 1)


# --- exploration ------------------------------------------------------------


@dataclass
class _Search:
    spec_of: SpecOf
    invariants: Mapping[str, Invariant]
    options: ExplorerOptions
    seen: Dict[TopConfig, int] = field(default_factory=dict)
    path: List[TraceStep] = field(default_factory=list)
    bound_hit: bool = False
    finals: Set[Database] = field(default_factory=set)
    collect: bool = False

    def run(self, cfg: TopConfig, remaining: int) -> Optional[Verdict]:
        previous = self.seen.get(cfg)
        if previous is not None and previous >= remaining:
            return None
        self.seen[cfg] = remaining
        if cfg.finished:
            if self.collect:
                self.finals.add(cfg.delta)
            return None
        try:
            moves = top_step(cfg, self.spec_of, self.options)
        except AcidifyError as exc:
            return Verdict(kind="error", trace=Trace(steps=list(self.path)), error=str(exc))
        if moves and remaining == 0:
            self.bound_hit = True
            return None
        for move in moves:
            self.path.append(
                TraceStep(step=len(self.path) + 1, actor=move.actor, rule=move.rule, digest=move.config.delta.digest())
            )
            if move.committed:
                logger.debug("commit by %s -> %s", move.actor, move.config.delta.digest())
                failed = self.violated(move.config.delta)
                if failed is not None:
                    trace = Trace(steps=list(self.path))
                    self.path.pop()
                    return Verdict(kind="violation", trace=trace, failed_invariant=failed)
            found = self.run(move.config, remaining - 1)
            self.path.pop()
            if found is not None:
                return found
        return None

    def violated(self, state: Database) -> Optional[str]:
        for name, check in self.invariants.items():
            if not check(state):
                return name
        return None


def explore(
    program: Command,
    delta0: Database,
    *,
    invariants: Optional[Mapping[str, Invariant]] = None,
    spec_of: SpecOf = default_spec_of,
    options: Optional[ExplorerOptions] = None,
) -> Verdict:
    """Depth-first enumeration of interleavings up to ``options.bound`` steps.

    ``invariants`` are checked in order after every commit; the first one
    that fails names the violation.
    """
    options = options or ExplorerOptions()
    search = _Search(spec_of, dict(invariants or {}), options)
    found = search.run(initial_config(program, delta0), options.bound)
    explored = len(search.seen)
    if found is not None:
        found.states_explored = explored
        logger.info("exploration found %s after %d states", found.kind, explored)
        return found
    if search.bound_hit:
        logger.warning("exploration bound %d exhausted after %d states", options.bound, explored)
        return Verdict(kind="bound-exhausted", states_explored=explored)
    return Verdict(kind="ok", states_explored=explored)


def final_states(
    program: Command,
    delta0: Database,
    *,
    spec_of: SpecOf = default_spec_of,
    options: Optional[ExplorerOptions] = None,
) -> FrozenSet[Database]:
    """Global states of every complete execution within the bound."""
    options = options or ExplorerOptions()
    search = _Search(spec_of, {}, options, collect=True)
    search.run(initial_config(program, delta0), options.bound)
    return frozenset(search.finals)


def run_alone(
    body: Command,
    txn_id: int,
    snapshot: Database,
    *,
    ids: Optional[IdSource] = None,
    options: Optional[ExplorerOptions] = None,
) -> Database:
    """Local stepping to completion with no interference; returns the final local database."""
    ids = ids or IdSource(snapshot.max_id() + 1)
    cfg = LocalConfig(txn_id, body, Database())
    while not isinstance(cfg.command, Skip):
        cfg = local_step(snapshot, cfg, ids, options)[0][0]
    return cfg.delta


def run_serial(
    transactions: Sequence[Command],
    delta0: Database,
    *,
    options: Optional[ExplorerOptions] = None,
) -> Database:
    """Run each transaction to completion in order, committing between them."""
    ids = IdSource(delta0.max_id() + 1)
    state = delta0
    for position, item in enumerate(transactions, start=1):
        txn_id = item.txn_id if isinstance(item, (Txn, TxnRun)) else position
        body = item.body if isinstance(item, (Txn, TxnRun)) else item
        local = run_alone(body, txn_id, state, ids=ids, options=options)
        merged = flush(_own_writes(local, txn_id), state)
        if merged.records != state.records:
            merged = Database(records=merged.records, version=state.version + 1)
        state = merged
    return state


# --- program workloads ------------------------------------------------------


def level_for(levels: Mapping[str, str], txn: str, instance: str = "") -> str:
    """Level of an instance: by instance label, then transaction name, then ``all``; SER otherwise."""
    for key in (instance, txn, "all"):
        if key and key in levels:
            return levels[key]
    return "SER"


def workload(program: ProgramSpec, levels: Mapping[str, str]) -> Command:
    """The program's run instances in parallel, each bound to its arguments."""
    branches = []
    for index, run in enumerate(program.runs, start=1):
        decl = program.txn(run.txn)
        body = bind_params(decl.body, tuple(run.args.items()))
        level = builtin_spec(level_for(levels, run.txn, run.instance)).name
        branches.append(Txn(index, run.instance, level, body))
    return Par(tuple(branches))


def program_conditions(program: ProgramSpec) -> Dict[str, Invariant]:
    """Invariants and explorer-only checks as ground predicates over committed states."""
    out: Dict[str, Invariant] = {}
    for item in program.conditions():
        out[item.name] = _ground_check(item.formula)
    return out


def _ground_check(formula) -> Invariant:
    def check(state: Database) -> bool:
        return holds(formula, {"D": state}, universe=state.records)

    return check


def explore_program(
    program: ProgramSpec,
    levels: Mapping[str, str],
    *,
    options: Optional[ExplorerOptions] = None,
) -> Verdict:
    return explore(workload(program, levels), program.database, invariants=program_conditions(program), options=options)
