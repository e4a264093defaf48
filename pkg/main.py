from __future__ import annotations

import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Dict, Iterator, Optional

import click
from dotenv import load_dotenv

load_dotenv()

from models.errors import AcidifyError, ParseError, SolverError, UnknownSpecError
from models.program import ProgramSpec
from services.benchmark_repository import benchmark_names, load_benchmark
from services.explorer import explore_program
from services.isolation_specs import builtin_spec, store_lattice
from services.verifier import infer_program_levels, verify_program
from utils.config import ExplorerOptions, SolverConfig, VerifierOptions
from utils.log import configure_logging
from utils.parser import parse_file
from utils.printer import format_program

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3


@dataclass
class CliState:
    config: SolverConfig
    options: VerifierOptions


def load_program(target: str) -> ProgramSpec:
    """A program from an ``.sx`` path or a corpus benchmark name."""
    if os.path.exists(target):
        return parse_file(target)
    if target in benchmark_names():
        return load_benchmark(target).program
    raise click.BadParameter(f"{target!r} is neither a file nor one of {', '.join(benchmark_names())}", param_hint="FILE")


def parse_levels(text: str, program: ProgramSpec) -> Dict[str, str]:
    """``txn=level,...`` with ``all=level`` as a default; ``()`` or empty means no assignment."""
    text = text.strip()
    if text in ("", "()"):
        return {}
    levels: Dict[str, str] = {}
    instances = {run.instance for run in program.runs}
    for item in text.split(","):
        name, sep, level = item.partition("=")
        name, level = name.strip(), level.strip()
        if not sep or not name or not level:
            raise click.BadParameter(f"expected NAME=LEVEL, got {item!r}", param_hint="--levels")
        if name != "all" and name not in program.txn_names() and name not in instances:
            raise click.BadParameter(f"unknown transaction or instance {name!r}", param_hint="--levels")
        try:
            levels[name] = builtin_spec(level).name
        except UnknownSpecError as exc:
            raise click.BadParameter(str(exc), param_hint="--levels") from exc
    return levels


@contextmanager
def exit_codes() -> Iterator[None]:
    """Map engine errors to the CLI's exit codes."""
    try:
        yield
    except ParseError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_USAGE)
    except SolverError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_SOLVER)
    except AcidifyError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_USAGE)


@click.group()
@click.option("--solver-cmd", default=None, help="Solver command line reading SMT-LIB on stdin (ACIDIFY_SOLVER_CMD wins).")
@click.option("--timeout-ms", type=int, default=None, help="Per-query solver timeout.")
@click.option("--emit-smt", type=click.Path(file_okay=False), default=None, help="Write every solver script here.")
@click.option("--int-mode", type=click.Choice(["bv", "int"]), default=None, help="32-bit bit-vectors or unbounded integers.")
@click.option("--serializable-mode", is_flag=True, help="Use guarantees derived from interference-free runs.")
@click.option("--check-faithfulness", is_flag=True, help="Run each instance alone against its derived guarantee.")
@click.option("--allow-deep", is_flag=True, help="Accept transformers nested deeper than one bind.")
@click.option("--log-level", default=None, help="Logging level (ACIDIFY_LOG_LEVEL by default).")
@click.pass_context
def cli(
    ctx: click.Context,
    solver_cmd: Optional[str],
    timeout_ms: Optional[int],
    emit_smt: Optional[str],
    int_mode: Optional[str],
    serializable_mode: bool,
    check_faithfulness: bool,
    allow_deep: bool,
    log_level: Optional[str],
) -> None:
    """Verify and infer isolation levels of database transactions."""
    configure_logging(log_level)
    ctx.obj = CliState(
        config=SolverConfig.from_env(command=solver_cmd, timeout_ms=timeout_ms, emit_dir=emit_smt, int_mode=int_mode),
        options=VerifierOptions(
            allow_deep=allow_deep,
            serializable_mode=serializable_mode,
            check_faithfulness=check_faithfulness,
        ),
    )


@cli.command()
@click.argument("target")
@click.option("--store", type=click.Choice(["postgres", "mysql"]), default=None, help="Store whose level lattice is searched.")
@click.option("--check-expected", is_flag=True, help="Fail when a level differs from the program's expectations.")
@click.option("--json", "as_json", is_flag=True, help="Print the report as JSON.")
@click.pass_obj
def infer(state: CliState, target: str, store: Optional[str], check_expected: bool, as_json: bool) -> None:
    """Find the weakest level at which every transaction of TARGET verifies."""
    with exit_codes():
        program = load_program(target)
        store = store or program.store or "postgres"
        store_lattice(store)
        report = infer_program_levels(program, store=store, config=state.config, options=state.options)
        if as_json:
            click.echo(report.model_dump_json(indent=2))
        else:
            if report.render():
                click.echo(report.render())
            click.echo("levels: " + " ".join(f"{txn}={level}" for txn, level in report.levels.items()))
            for name in report.unverifiable:
                click.echo(f"unverifiable: {name}")
        ok = report.ok
        if check_expected:
            expected = program.expectations.get(store, {})
            mismatched = {txn: level for txn, level in expected.items() if report.levels.get(txn) != level}
            for txn, level in mismatched.items():
                click.echo(f"expected {txn}={level}, got {report.levels.get(txn, 'none')}", err=True)
            ok = ok and not mismatched
    sys.exit(EXIT_OK if ok else EXIT_FAILED)


@cli.command()
@click.argument("target")
@click.option("--levels", "levels_text", default="", help="Assignment such as new_order=si,payment=rc or all=ser.")
@click.option("--store", type=click.Choice(["postgres", "mysql"]), default=None)
@click.option("--json", "as_json", is_flag=True, help="Print the results as JSON.")
@click.pass_obj
def verify(state: CliState, target: str, levels_text: str, store: Optional[str], as_json: bool) -> None:
    """Verify transactions of TARGET at the given levels (SER when unassigned)."""
    with exit_codes():
        program = load_program(target)
        assignment = parse_levels(levels_text, program)
        default = assignment.pop("all", None)
        levels = {name: assignment.get(name, default or "SER") for name in program.txn_names()}
        results = verify_program(program, store=store, levels=levels, config=state.config, options=state.options)
        if as_json:
            click.echo("[" + ",".join(result.model_dump_json() for result in results) + "]")
        else:
            for result in results:
                click.echo(result.line())
    sys.exit(EXIT_OK if all(result.verified for result in results) else EXIT_FAILED)


@cli.command()
@click.argument("target")
@click.option("--levels", "levels_text", default="all=ser", show_default=True, help="Assignment by transaction or instance.")
@click.option("--bound", type=click.IntRange(min=1), default=40, show_default=True, help="Maximum reduction steps per path.")
@click.option("--all-orders", is_flag=True, help="Enumerate every FOREACH iteration order.")
@click.option("--trace", "full_trace", is_flag=True, help="Print one line per step of a violating trace.")
@click.option("--json", "as_json", is_flag=True, help="Print the verdict as JSON.")
def explore(target: str, levels_text: str, bound: int, all_orders: bool, full_trace: bool, as_json: bool) -> None:
    """Enumerate the interleavings of TARGET's run instances and check its conditions after every commit."""
    with exit_codes():
        program = load_program(target)
        levels = parse_levels(levels_text, program)
        verdict = explore_program(program, levels, options=ExplorerOptions(bound=bound, all_orders=all_orders))
        if as_json:
            click.echo(verdict.model_dump_json(indent=2))
        else:
            summary = f"verdict={verdict.kind} states={verdict.states_explored}"
            if verdict.failed_invariant:
                summary += f" failed={verdict.failed_invariant}"
            if verdict.error:
                summary += f" error={verdict.error}"
            click.echo(summary)
            if verdict.trace is not None:
                if full_trace:
                    click.echo(verdict.trace.render())
                else:
                    click.echo(" ".join(f"{step.actor}:{step.rule}" for step in verdict.trace.steps))
    sys.exit(EXIT_OK if verdict.kind in ("ok", "bound-exhausted") else EXIT_FAILED)


@cli.command(name="fmt")
@click.argument("target")
def fmt(target: str) -> None:
    """Print TARGET in canonical surface syntax."""
    with exit_codes():
        click.echo(format_program(load_program(target)), nl=False)


@cli.command(name="benchmarks")
def benchmarks() -> None:
    """List the corpus benchmarks."""
    with exit_codes():
        for name in benchmark_names():
            click.echo(f"{name}\t{load_benchmark(name).description}")


if __name__ == "__main__":
    cli()
