from __future__ import annotations

import logging
import os
import re
import shutil
import subprocess
import time
from typing import Optional

from models.errors import SolverError, SolverUnavailableError
from utils.config import SolverConfig

logger = logging.getLogger(__name__)

ANSWERS = ("sat", "unsat", "unknown")


class SolverSession:
    """Runs one SMT-LIB script per call through the configured solver process."""

    def __init__(self, config: Optional[SolverConfig] = None):
        self.config = config or SolverConfig.from_env()
        self.calls = 0

    def available(self) -> bool:
        argv = self.config.argv()
        return bool(argv) and shutil.which(argv[0]) is not None

    def check(self, script: str, *, label: str = "query", sidecar: Optional[str] = None) -> str:
        """Return ``sat``, ``unsat`` or ``unknown``; a timeout counts as ``unknown``."""
        self.calls += 1
        self._emit(script, label, sidecar)
        argv = self.config.argv()
        if not argv:
            raise SolverUnavailableError("empty solver command")
        started = time.monotonic()
        try:
            completed = subprocess.run(
                argv,
                input=script,
                capture_output=True,
                text=True,
                timeout=self.config.timeout_ms / 1000.0,
            )
        except FileNotFoundError as exc:
            raise SolverUnavailableError(f"solver command {argv[0]!r} not found") from exc
        except subprocess.TimeoutExpired:
            logger.warning("solver timed out after %d ms on %s", self.config.timeout_ms, label)
            return "unknown"
        except OSError as exc:
            raise SolverError(f"could not run solver {argv[0]!r}: {exc}") from exc
        elapsed = int((time.monotonic() - started) * 1000)
        output = completed.stdout.strip()
        if "(error" in output:
            raise SolverError(f"solver rejected {label}: {output.splitlines()[-1]}")
        answer = output.splitlines()[0].strip() if output else ""
        if answer not in ANSWERS:
            raise SolverError(f"unexpected solver answer {answer!r} for {label} (exit {completed.returncode})")
        logger.debug("solver %s -> %s in %d ms", label, answer, elapsed)
        if answer == "unknown":
            logger.warning("solver answered unknown on %s", label)
        return answer

    def _emit(self, script: str, label: str, sidecar: Optional[str]) -> None:
        if not self.config.emit_dir:
            return
        os.makedirs(self.config.emit_dir, exist_ok=True)
        stem = os.path.join(self.config.emit_dir, f"{self.calls:04d}-{re.sub(r'[^A-Za-z0-9_.-]+', '_', label)}")
        with open(stem + ".smt2", "w", encoding="utf-8") as handle:
            handle.write(script)
        if sidecar is not None:
            with open(stem + ".sx", "w", encoding="utf-8") as handle:
                handle.write(sidecar)
