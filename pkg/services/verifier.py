"""Rely-guarantee verification of transactions and the isolation-level search."""

from __future__ import annotations

import logging
import time
from typing import Any, Dict, List, Mapping, Optional

from models.command import Command, Foreach, If, Let, Select, Seq, Update, bind_params
from models.errors import AcidifyError, NestedBindDepthError, UnsupportedCommandError
from models.expr import BoolOp, Field, InDom, Var
from models.ground import GroundContext, eval_formula, universe_of
from models.logic import (
    FEq,
    FIff,
    FIn,
    FInProj,
    Formula,
    SetExpr,
    SVar,
    TConst,
    TField,
    TRUE,
    TVar,
    Transformer,
    conj,
    disj,
    forall,
    fresh_name,
    neg,
    subst,
)
from models.program import Guarantee, ProgramSpec, TxnDecl
from models.results import InferenceReport, StageName, StageOutcome, VerificationResult
from models.values import Database, Record, flush
from services.encoding import Encoder
from services.explorer import run_alone
from services.inference import (
    InferenceContext,
    check_transformer_stability,
    infer,
    serial_context,
    stability_shortcut,
)
from services.isolation_specs import (
    CUR,
    SNAP,
    Rely,
    RelyDisjunct,
    build_rely,
    builtin_spec,
    check_spec_stability,
    rely_modulo,
    store_lattice,
)
from services.prover import Prover
from utils.config import SolverConfig, VerifierOptions

logger = logging.getLogger(__name__)

COMMITTED = "D1"


def flush_image(source: SetExpr, pre: str, post: str) -> Formula:
    """``post = source ▷ pre``: live records of ``source`` plus untouched records of ``pre``."""
    x = TVar(fresh_name("x"))
    live = conj(FIn(x, source), neg(_deleted(x)))
    kept = conj(FIn(x, SVar(pre)), neg(FInProj(TField(x, "id"), source)))
    return forall((x,), FIff(FIn(x, SVar(post)), disj(live, kept)))


def _deleted(var: TVar) -> Formula:
    return FEq(TField(var, "del"), TConst(True))


# --- store-specific rewriting -----------------------------------------------


def rewrite_update_for_store(command: Command, store: Optional[str], level: str) -> Command:
    """Split each UPDATE into a read of its targets and an update guarded by that read.

    Applies to postgres, where an UPDATE re-evaluates its condition per record
    against the latest committed version at every level. Other stores are
    returned unchanged; ``level`` is accepted for callers that key on it.
    """
    if (store or "").lower() != "postgres":
        return command
    return _split_updates(command)


def _split_updates(command: Command) -> Command:
    if isinstance(command, Update):
        guard = fresh_name("guard")
        guarded = BoolOp("and", (command.cond, InDom(Field(Var(command.var), "id"), Var(guard))))
        return Select(
            guard,
            command.var,
            command.table,
            command.cond,
            Update(command.var, command.table, command.value, guarded),
        )
    if isinstance(command, Let):
        return Let(command.name, command.value, _split_updates(command.body))
    if isinstance(command, If):
        return If(command.cond, _split_updates(command.then), _split_updates(command.else_))
    if isinstance(command, Seq):
        return Seq(_split_updates(command.first), _split_updates(command.second))
    if isinstance(command, Select):
        return Select(command.target, command.var, command.table, command.cond, _split_updates(command.body), command.single)
    if isinstance(command, Foreach):
        return Foreach(command.source, command.done_var, command.item_var, _split_updates(command.body))
    return command


# --- set functions ----------------------------------------------------------


def set_function_axioms(formula: Formula, program: Optional[ProgramSpec] = None) -> List[Formula]:
    """The axioms the encoder adds for set functions, picks and projections in ``formula``."""
    schema = {name: program.table_fields(name) for name in program.table_names()} if program else {}
    encoder = Encoder(schema=schema, field_sorts=program.field_sorts() if program else {})
    encoder.encode(formula)
    return list(encoder.axioms)


# --- verification -----------------------------------------------------------


class Verifier:
    """Checks transactions of one program against one store, sharing solver work across levels."""

    def __init__(
        self,
        program: ProgramSpec,
        *,
        store: Optional[str] = None,
        config: Optional[SolverConfig] = None,
        options: Optional[VerifierOptions] = None,
        guarantees: Optional[Dict[str, Guarantee]] = None,
    ):
        self.program = program
        self.store = (store or program.store or "postgres").lower()
        self.config = config or SolverConfig.from_env()
        self.options = options or VerifierOptions()
        self.guarantees = dict(program.guarantees if guarantees is None else guarantees)
        self.rely: Rely = build_rely(program, self.guarantees)
        self.prover = Prover.for_program(program, self.config)
        self._atoms: Dict[str, bool] = {}
        self._invariant_stable: Optional[bool] = None
        self._preserves: Dict[str, bool] = {}

    # stage helpers

    def guarantee(self, txn: str, post: str) -> Formula:
        """The guarantee of ``txn`` between ``D`` and ``post``, frame included."""
        item = self.guarantees.get(txn)
        if item is None:
            return TRUE
        writes = tuple(item.writes) if item.writes is not None else None
        disjunct = RelyDisjunct(txn, item.formula, writes, self.program.table_names())
        body = subst(item.formula, {CUR: SVar(post)}) if post != CUR else item.formula
        return conj(body, *disjunct.frame(SNAP, post))  # type: ignore[arg-type]

    def _spec_stable(self, atom) -> bool:
        if atom.name not in self._atoms:
            self._atoms[atom.name] = check_spec_stability(self.rely, atom, self.prover)
        return self._atoms[atom.name]

    def _invariant_is_stable(self) -> bool:
        if self._invariant_stable is None:
            invariant = self.program.invariant()
            later = subst(invariant, {SNAP: SVar(CUR)})
            stable = True
            for item in self.rely.disjuncts:
                if not self.prover.valid([invariant, item.step(SNAP, CUR)], later, label=f"stable-I-{item.txn}"):  # type: ignore[list-item]
                    logger.info("invariant is not preserved by the guarantee of %s", item.txn)
                    stable = False
                    break
            self._invariant_stable = stable
        return self._invariant_stable

    def _preserves_invariant(self, txn: str) -> bool:
        if txn not in self._preserves:
            invariant = self.program.invariant()
            later = subst(invariant, {SNAP: SVar(CUR)})
            self._preserves[txn] = self.prover.valid(
                [invariant, self.guarantee(txn, CUR)], later, label=f"preserve-I-{txn}"  # type: ignore[list-item]
            )
        return self._preserves[txn]

    def verify_txn(self, decl: TxnDecl, level: str) -> VerificationResult:
        """Run the premise pipeline for ``decl`` at ``level``; the first failing stage is reported."""
        spec = builtin_spec(level)
        started = time.monotonic()
        before_queries, before_unknowns = self.prover.stats.queries, self.prover.stats.unknowns
        before_gks = self.prover.stats.gks_violations
        stages: List[StageOutcome] = []

        def done(failed: Optional[StageName] = None, detail: Optional[str] = None) -> VerificationResult:
            result = VerificationResult(
                txn=decl.name,
                store=self.store,
                level=spec.name,
                status="fail" if failed else "ok",
                failed_stage=failed,
                detail=detail,
                stages=stages,
                queries=self.prover.stats.queries - before_queries,
                unknowns=self.prover.stats.unknowns - before_unknowns,
                gks_violations=self.prover.stats.gks_violations - before_gks,
                time_ms=int((time.monotonic() - started) * 1000),
            )
            logger.info(result.line())
            return result

        def stage(name: StageName, ok: bool, detail: Optional[str] = None, fast_path: Optional[str] = None) -> bool:
            stages.append(StageOutcome(stage=name, ok=ok, detail=detail, fast_path=fast_path))
            return ok

        stable = self._spec_stable(spec.on_step) and self._spec_stable(spec.on_commit) and self._invariant_is_stable()
        if not stage("spec-stability", stable):
            return done("spec-stability", f"isolation {spec.name} or the invariant is not stable under the rely")

        body = rewrite_update_for_store(decl.body, self.store, spec.name)
        ctx = InferenceContext.for_txn(
            decl,
            self.program,
            rely_modulo(self.rely, spec.on_step),
            prover=self.prover,
            allow_deep=self.options.allow_deep,
        )
        try:
            transformer = infer(body, ctx)
        except (NestedBindDepthError, UnsupportedCommandError) as exc:
            stage("inference", False, str(exc))
            return done("inference", str(exc))
        stage("inference", True, f"weakened={ctx.stats.weakened}", fast_path=",".join(sorted(ctx.stats.fast_paths)) or None)

        commit_ctx = InferenceContext.for_txn(decl, self.program, rely_modulo(self.rely, spec.on_commit), prover=self.prover)
        shortcut = stability_shortcut(transformer.body, commit_ctx)
        if shortcut is None and not check_transformer_stability(transformer.body, commit_ctx):
            stage("transformer-stability", False)
            return done("transformer-stability", f"commits under {spec.name} may observe interference")
        stage("transformer-stability", True, fast_path=shortcut)

        if not stage("guarantee-entailment", self._entails_guarantee(decl.name, transformer)):
            return done("guarantee-entailment", "the committed image may violate the guarantee")

        if not stage("invariant-preservation", self._preserves_invariant(decl.name)):
            return done("invariant-preservation", "the guarantee does not preserve the invariant")
        return done()

    def _entails_guarantee(self, txn: str, transformer: Transformer) -> bool:
        goal = self.guarantee(txn, COMMITTED)
        if goal == TRUE:
            return True
        hypotheses = [self.program.invariant(), flush_image(transformer.body, SNAP, COMMITTED)]
        return self.prover.valid(hypotheses, goal, label=f"guarantee-{txn}", pre_states=(SNAP,))

    # lattice walk

    def infer_levels(self, names: Optional[List[str]] = None) -> InferenceReport:
        """The weakest lattice level at which each transaction verifies."""
        lattice = store_lattice(self.store)
        report = InferenceReport(store=lattice.store)
        for decl in self.program.transactions:
            if names is not None and decl.name not in names:
                continue
            last: Optional[VerificationResult] = None
            for level in lattice.levels:
                last = self.verify_txn(decl, level)
                report.attempts.append(last)
                if last.verified:
                    report.levels[decl.name] = level
                    break
            if last is not None:
                report.results.append(last)
                if not last.verified:
                    logger.warning("UNVERIFIABLE-AT-SER: %s fails even at %s", decl.name, lattice.strongest)
                    report.unverifiable.append(decl.name)
        return report

    def verify_levels(self, levels: Mapping[str, str]) -> List[VerificationResult]:
        return [self.verify_txn(self.program.txn(name), level) for name, level in levels.items()]


# --- serializable mode ------------------------------------------------------


def serializable_guarantees(program: ProgramSpec) -> Dict[str, Guarantee]:
    """Each transaction promises exactly what it does when run without interference."""
    out: Dict[str, Guarantee] = {}
    for decl in program.transactions:
        transformer = infer(decl.body, serial_context(decl, program))
        out[decl.name] = Guarantee(txn=decl.name, formula=flush_image(transformer.body, SNAP, CUR))
    return out


def infer_serializable_equivalence(
    program: ProgramSpec,
    store: Optional[str] = None,
    *,
    config: Optional[SolverConfig] = None,
    options: Optional[VerifierOptions] = None,
) -> InferenceReport:
    guarantees = serializable_guarantees(program)
    options = options or VerifierOptions(serializable_mode=True)
    if options.check_faithfulness:
        for name in unfaithful_guarantees(program, guarantees):
            logger.warning("derived guarantee of %s is not met by a lone run", name)
    verifier = Verifier(program, store=store, config=config, options=options, guarantees=guarantees)
    return verifier.infer_levels()


def guarantee_holds_on_run(
    program: ProgramSpec,
    txn: str,
    args: Mapping[str, Any],
    guarantee: Guarantee,
    delta0: Optional[Database] = None,
) -> bool:
    """Run ``txn`` alone from ``delta0`` and evaluate its guarantee on the committed state."""
    decl = program.txn(txn)
    start = program.database if delta0 is None else delta0
    local = run_alone(bind_params(decl.body, tuple(args.items())), program.txn_id(txn), start)
    after = flush(local, start)
    records: List[Record] = []
    sets: Dict[str, Any] = {SNAP: start, CUR: after}
    terms: Dict[str, Any] = {}
    for name, value in args.items():
        if isinstance(value, frozenset):
            sets[name] = value
            records.extend(value)
        else:
            terms[name] = value
            if isinstance(value, Record):
                records.append(value)
    ctx = GroundContext.build(
        states=sets,
        terms=terms,
        universe=universe_of(start, after, local, records),
        first_fresh=start.max_id() + 1,
    )
    return eval_formula(guarantee.formula, ctx)


def unfaithful_guarantees(program: ProgramSpec, guarantees: Optional[Mapping[str, Guarantee]] = None) -> List[str]:
    """Transactions whose guarantee a lone run of one of the program's instances violates."""
    guarantees = program.guarantees if guarantees is None else guarantees
    failed: List[str] = []
    for run in program.runs:
        item = guarantees.get(run.txn)
        if item is None or run.txn in failed:
            continue
        try:
            ok = guarantee_holds_on_run(program, run.txn, run.args, item)
        except AcidifyError as exc:
            logger.warning("cannot check the guarantee of %s on %s: %s", run.txn, run.instance, exc)
            ok = False
        if not ok:
            failed.append(run.txn)
    return failed


def verify_program(
    program: ProgramSpec,
    *,
    store: Optional[str] = None,
    levels: Optional[Mapping[str, str]] = None,
    config: Optional[SolverConfig] = None,
    options: Optional[VerifierOptions] = None,
) -> List[VerificationResult]:
    """Verify each transaction at the given level (SER by default)."""
    options = options or VerifierOptions()
    guarantees = serializable_guarantees(program) if options.serializable_mode else None
    verifier = Verifier(program, store=store, config=config, options=options, guarantees=guarantees)
    wanted = dict(levels or {})
    return verifier.verify_levels({name: wanted.get(name, "SER") for name in program.txn_names() if not levels or name in wanted})


def infer_program_levels(
    program: ProgramSpec,
    *,
    store: Optional[str] = None,
    config: Optional[SolverConfig] = None,
    options: Optional[VerifierOptions] = None,
) -> InferenceReport:
    options = options or VerifierOptions()
    if options.serializable_mode:
        return infer_serializable_equivalence(program, store, config=config, options=options)
    return Verifier(program, store=store, config=config, options=options).infer_levels()
