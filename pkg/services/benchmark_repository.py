from __future__ import annotations

import json
import logging
import os
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, ValidationError

from models.errors import AcidifyError, UnknownBenchmarkError
from models.program import ProgramSpec
from utils.parser import parse_file

logger = logging.getLogger(__name__)

RESOURCES_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "resources")


class ExploreExpectation(BaseModel):
    levels: Dict[str, str] = Field(default_factory=dict, description="Level assignment, e.g. {'all': 'rc'}.")
    bound: int = Field(40, gt=0)
    verdict: str = Field(..., description="Expected verdict kind.")


class ManifestEntry(BaseModel):
    file: str
    description: str = ""
    explore: List[ExploreExpectation] = Field(default_factory=list)


class Manifest(BaseModel):
    benchmarks: Dict[str, ManifestEntry] = Field(default_factory=dict)


class Benchmark(BaseModel):
    """A corpus fixture: the parsed program plus its expected results."""

    name: str
    path: str
    description: str = ""
    program: ProgramSpec
    explore: List[ExploreExpectation] = Field(default_factory=list)

    @property
    def expected(self) -> Dict[str, Dict[str, str]]:
        return self.program.expectations


class BenchmarkRepository:
    """Loads corpus fixtures from a resources directory, caching each parsed program."""

    def __init__(self, root: Optional[str] = None):
        self.root = root or RESOURCES_DIR
        self._manifest: Optional[Manifest] = None
        self._memory: Dict[str, Benchmark] = {}

    def manifest(self) -> Manifest:
        if self._manifest is None:
            path = os.path.join(self.root, "manifest.json")
            try:
                with open(path, encoding="utf-8") as handle:
                    self._manifest = Manifest.model_validate(json.load(handle))
            except (OSError, json.JSONDecodeError, ValidationError) as exc:
                raise AcidifyError(f"cannot read benchmark manifest {path}: {exc}") from exc
        return self._manifest

    def names(self) -> List[str]:
        return sorted(self.manifest().benchmarks)

    def load(self, name: str) -> Benchmark:
        if name in self._memory:
            return self._memory[name]
        entry = self.manifest().benchmarks.get(name)
        if entry is None:
            raise UnknownBenchmarkError(f"unknown benchmark {name!r}; expected one of {', '.join(self.names())}")
        path = os.path.join(self.root, entry.file)
        benchmark = Benchmark(
            name=name,
            path=path,
            description=entry.description,
            program=parse_file(path, name=name),
            explore=entry.explore,
        )
        logger.debug("loaded benchmark %s from %s", name, path)
        self._memory[name] = benchmark
        return benchmark


_default = BenchmarkRepository()


def load_benchmark(name: str) -> Benchmark:
    return _default.load(name)


def benchmark_names() -> List[str]:
    return _default.names()
