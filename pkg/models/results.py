from __future__ import annotations

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field

VerdictKind = Literal["ok", "violation", "bound-exhausted", "error"]
StageName = Literal[
    "spec-stability",
    "inference",
    "transformer-stability",
    "guarantee-entailment",
    "invariant-preservation",
]


class TraceStep(BaseModel):
    step: int = Field(..., description="1-based position in the trace.")
    actor: str = Field(..., description="Transaction instance, commit(i) or env.")
    rule: str = Field(..., description="Reduction rule that fired.")
    digest: str = Field(..., description="Short digest of the global state after the step.")
    note: Optional[str] = Field(None, description="Human-readable detail of the step.")

    def line(self) -> str:
        suffix = f"  ; {self.note}" if self.note else ""
        return f"{self.step} {self.actor} {self.rule} {self.digest}{suffix}"


class Trace(BaseModel):
    steps: List[TraceStep] = Field(default_factory=list)

    def render(self) -> str:
        return "\n".join(step.line() for step in self.steps)

    def rules(self, actor_prefix: str = "") -> List[str]:
        return [step.rule for step in self.steps if step.actor.startswith(actor_prefix)]


class Verdict(BaseModel):
    """Outcome of bounded exploration."""

    kind: VerdictKind
    states_explored: int = 0
    trace: Optional[Trace] = None
    failed_invariant: Optional[str] = None
    error: Optional[str] = None

    model_config = {
        "json_schema_extra": {
            "example": {
                "kind": "violation",
                "states_explored": 212,
                "failed_invariant": "order_ids_unique",
                "trace": {"steps": [{"step": 1, "actor": "no1", "rule": "E-Txn-Start", "digest": "3f2a1c0b9e"}]},
            }
        }
    }

    @property
    def ok(self) -> bool:
        return self.kind == "ok"


class StageOutcome(BaseModel):
    stage: StageName
    ok: bool
    detail: Optional[str] = None
    queries: int = 0
    fast_path: Optional[str] = Field(None, description="Name of the shortcut that decided the stage, if any.")


class VerificationResult(BaseModel):
    """Per-transaction verification record."""

    txn: str
    store: str
    level: str
    status: Literal["ok", "fail"]
    failed_stage: Optional[StageName] = None
    detail: Optional[str] = None
    stages: List[StageOutcome] = Field(default_factory=list)
    queries: int = 0
    unknowns: int = 0
    gks_violations: int = Field(0, description="Solver assertions outside the decidable prefix class.")
    time_ms: int = 0

    model_config = {
        "json_schema_extra": {
            "example": {
                "txn": "payment",
                "store": "postgres",
                "level": "RC",
                "status": "ok",
                "queries": 9,
                "time_ms": 412,
            }
        }
    }

    @property
    def verified(self) -> bool:
        return self.status == "ok"

    def line(self) -> str:
        status = "ok" if self.verified else f"fail:{self.failed_stage}"
        return (
            f"txn={self.txn} store={self.store} level={self.level} status={status} "
            f"queries={self.queries} time_ms={self.time_ms}"
            + (f" gks_violations={self.gks_violations}" if self.gks_violations else "")
        )


class InferenceReport(BaseModel):
    store: str
    levels: Dict[str, str] = Field(default_factory=dict, description="Weakest verified level per transaction.")
    results: List[VerificationResult] = Field(default_factory=list, description="Final attempt per transaction.")
    attempts: List[VerificationResult] = Field(default_factory=list, description="Every attempt in lattice order.")
    unverifiable: List[str] = Field(default_factory=list, description="Transactions that failed even at SER.")

    @property
    def ok(self) -> bool:
        return not self.unverifiable and all(result.verified for result in self.results)

    def render(self) -> str:
        return "\n".join(result.line() for result in self.results)
