from __future__ import annotations

import os
import shlex
from typing import List, Literal, Optional

from pydantic import BaseModel, Field

DEFAULT_SOLVER_CMD = "z3 -in"
DEFAULT_TIMEOUT_MS = 10000


class SolverConfig(BaseModel):
    """How to launch the external SMT solver."""

    command: str = Field(DEFAULT_SOLVER_CMD, description="Command line reading SMT-LIB on stdin.")
    timeout_ms: int = Field(DEFAULT_TIMEOUT_MS, gt=0, description="Per-query timeout.")
    emit_dir: Optional[str] = Field(None, description="Directory receiving every emitted script.")
    int_mode: Literal["bv", "int"] = Field("bv", description="32-bit bit-vectors or unbounded integers.")

    model_config = {
        "json_schema_extra": {
            "example": {"command": "z3 -in", "timeout_ms": 10000, "emit_dir": None, "int_mode": "bv"}
        }
    }

    @classmethod
    def from_env(
        cls,
        *,
        command: Optional[str] = None,
        timeout_ms: Optional[int] = None,
        emit_dir: Optional[str] = None,
        int_mode: Optional[str] = None,
    ) -> "SolverConfig":
        """Resolve settings: ACIDIFY_SOLVER_CMD wins over the flag; flags win for the rest."""
        return cls(
            command=os.environ.get("ACIDIFY_SOLVER_CMD") or command or DEFAULT_SOLVER_CMD,
            timeout_ms=timeout_ms or int(os.environ.get("ACIDIFY_TIMEOUT_MS", DEFAULT_TIMEOUT_MS)),
            emit_dir=emit_dir or os.environ.get("ACIDIFY_EMIT_SMT") or None,
            int_mode=int_mode or os.environ.get("ACIDIFY_INT_MODE", "bv"),
        )

    def argv(self) -> List[str]:
        return shlex.split(self.command)


class ExplorerOptions(BaseModel):
    bound: int = Field(40, gt=0, description="Maximum number of reduction steps along a path.")
    all_orders: bool = Field(False, description="Enumerate every FOREACH iteration order.")
    reads_own_writes: bool = Field(False, description="SELECT reads the local flush image of the snapshot.")
    track_reads: bool = Field(False, description="SELECT adds the records it returns to the local database.")


class VerifierOptions(BaseModel):
    allow_deep: bool = Field(False, description="Accept transformers beyond one level of bind nesting.")
    serializable_mode: bool = Field(False, description="Derive guarantees from interference-free transformers.")
    check_faithfulness: bool = Field(False, description="Run lone transactions against their derived guarantees.")


def log_level_from_env(default: str = "WARNING") -> str:
    return os.environ.get("ACIDIFY_LOG_LEVEL", default).upper()
