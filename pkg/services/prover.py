from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence, Tuple

from models.logic import FALSE, TRUE, Formula, neg
from models.program import ProgramSpec
from services.encoding import Encoder, FreshNamespace, Scope, check_gks, nnf, prenex, prenex_signature, split_conjuncts
from services.smtlib import emit_smtlib
from services.solver import SolverSession
from utils.config import SolverConfig

logger = logging.getLogger(__name__)


@dataclass
class QueryRecord:
    label: str
    answer: str
    signatures: List[str] = field(default_factory=list)


@dataclass
class ProverStats:
    queries: int = 0
    unknowns: int = 0
    gks_violations: int = 0
    history: List[QueryRecord] = field(default_factory=list)


class Prover:
    """Validity and satisfiability of formula sets through an external solver."""

    def __init__(
        self,
        config: Optional[SolverConfig] = None,
        *,
        schema: Optional[Mapping[str, Sequence[str]]] = None,
        field_sorts: Optional[Mapping[str, str]] = None,
        txn_id: int = 0,
        session: Optional[SolverSession] = None,
        keys: Optional[Mapping[str, Sequence[str]]] = None,
    ):
        self.config = config or SolverConfig.from_env()
        self.session = session or SolverSession(self.config)
        self.schema = dict(schema or {})
        self.field_sorts = dict(field_sorts or {})
        self.keys = dict(keys or {})
        self.namespace = FreshNamespace(txn_id)
        self.stats = ProverStats()

    @classmethod
    def for_program(cls, program: ProgramSpec, config: Optional[SolverConfig] = None, *, txn_id: int = 0, session=None) -> "Prover":
        schema = {name: program.table_fields(name) for name in program.table_names()}
        return cls(
            config,
            schema=schema,
            field_sorts=program.field_sorts(),
            txn_id=txn_id,
            session=session,
            keys=program.stable_keys(),
        )

    def script(self, formulas: Sequence[Formula], *, pre_states: Sequence[str] = (), label: str = "query") -> Tuple[str, List[Formula]]:
        """The SMT-LIB text asserting ``formulas``, and the prenex assertions it contains."""
        encoder = Encoder(
            self.namespace, schema=self.schema, field_sorts=self.field_sorts, pre_states=pre_states, keys=self.keys
        )
        encoder.declare_free(*formulas)
        lowered = [encoder.formula(item, Scope()) for item in formulas]
        background = encoder.finish()
        assertions: List[Formula] = []
        for item in background + lowered:
            for part in split_conjuncts(nnf(item)):
                assertions.append(prenex(part))
        text = emit_smtlib(
            assertions,
            constants=encoder.constants,
            functions=list(encoder.functions.values()),
            fields=encoder.fields,
            int_mode=self.config.int_mode,
            comments=[label],
        )
        return text, assertions

    def satisfiable(self, formulas: Sequence[Formula], *, label: str = "query", pre_states: Sequence[str] = ()) -> str:
        if any(item == FALSE for item in formulas):
            return "unsat"
        text, assertions = self.script(formulas, pre_states=pre_states, label=label)
        signatures = [prenex_signature(item) for item in assertions]
        broken = [sig for item, sig in zip(assertions, signatures) if not check_gks(item)]
        if broken:
            self.stats.gks_violations += len(broken)
            logger.warning("%s: %d assertions outside the decidable prefix class: %s", label, len(broken), broken)
        self.stats.queries += 1
        answer = self.session.check(text, label=label, sidecar="\n".join(str(item) for item in formulas))
        if answer == "unknown":
            self.stats.unknowns += 1
        self.stats.history.append(QueryRecord(label, answer, signatures))
        return answer

    def valid(
        self,
        hypotheses: Sequence[Formula],
        goal: Formula,
        *,
        label: str = "query",
        pre_states: Sequence[str] = (),
    ) -> bool:
        """``hypotheses ⇒ goal``; ``unknown`` counts as not valid."""
        if goal == TRUE:
            return True
        answer = self.satisfiable(list(hypotheses) + [neg(goal)], label=label, pre_states=pre_states)
        return answer == "unsat"
