from __future__ import annotations

from dataclasses import dataclass
from typing import Any, FrozenSet, Iterator, Tuple

from models.expr import Expr, substitute
from models.values import Database, Record


class Command:
    """Base class of transaction-language commands."""


@dataclass(frozen=True)
class Skip(Command):
    pass


@dataclass(frozen=True)
class Let(Command):
    name: str
    value: Expr
    body: Command


@dataclass(frozen=True)
class If(Command):
    cond: Expr
    then: Command
    else_: Command


@dataclass(frozen=True)
class Seq(Command):
    first: Command
    second: Command


@dataclass(frozen=True)
class Insert(Command):
    value: Expr


@dataclass(frozen=True)
class Delete(Command):
    var: str
    table: str
    cond: Expr


@dataclass(frozen=True)
class Update(Command):
    var: str
    table: str
    value: Expr
    cond: Expr


@dataclass(frozen=True)
class Select(Command):
    """``LET target = SELECT(λvar. cond) IN body`` restricted to one table.

    With ``single`` the target binds the minimum-id matching record instead of
    the matching set.
    """

    target: str
    var: str
    table: str
    cond: Expr
    body: Command
    single: bool = False


@dataclass(frozen=True)
class Foreach(Command):
    source: Expr
    done_var: str
    item_var: str
    body: Command


@dataclass(frozen=True)
class ForeachRun(Command):
    """Runtime loop: ``done`` items already iterated, ``pending`` still to go."""

    done: FrozenSet[Any]
    pending: FrozenSet[Any]
    done_var: str
    item_var: str
    body: Command


@dataclass(frozen=True)
class Txn(Command):
    txn_id: int
    name: str
    level: str
    body: Command


@dataclass(frozen=True)
class TxnRun(Command):
    txn_id: int
    name: str
    level: str
    body: Command
    delta: Database
    snapshot: Database


@dataclass(frozen=True)
class Par(Command):
    branches: Tuple[Command, ...]


def seq(*commands: Command) -> Command:
    """Right-nested sequence; ``seq()`` is SKIP."""
    items = [command for command in commands if not isinstance(command, Skip)]
    if not items:
        return Skip()
    result = items[-1]
    for command in reversed(items[:-1]):
        result = Seq(command, result)
    return result


def subst_command(command: Command, name: str, value: Any) -> Command:
    """Bind ``name`` to a runtime value in ``command``, respecting shadowing."""
    if isinstance(command, (Skip, TxnRun, Txn, Par)):
        return command
    if isinstance(command, Let):
        body = command.body if command.name == name else subst_command(command.body, name, value)
        return Let(command.name, substitute(command.value, name, value), body)
    if isinstance(command, If):
        return If(
            substitute(command.cond, name, value),
            subst_command(command.then, name, value),
            subst_command(command.else_, name, value),
        )
    if isinstance(command, Seq):
        return Seq(subst_command(command.first, name, value), subst_command(command.second, name, value))
    if isinstance(command, Insert):
        return Insert(substitute(command.value, name, value))
    if isinstance(command, Delete):
        if command.var == name:
            return command
        return Delete(command.var, command.table, substitute(command.cond, name, value))
    if isinstance(command, Update):
        if command.var == name:
            return command
        return Update(
            command.var,
            command.table,
            substitute(command.value, name, value),
            substitute(command.cond, name, value),
        )
    if isinstance(command, Select):
        cond = command.cond if command.var == name else substitute(command.cond, name, value)
        body = command.body if command.target == name else subst_command(command.body, name, value)
        return Select(command.target, command.var, command.table, cond, body, command.single)
    if isinstance(command, Foreach):
        body = command.body
        if name not in (command.done_var, command.item_var):
            body = subst_command(body, name, value)
        return Foreach(substitute(command.source, name, value), command.done_var, command.item_var, body)
    if isinstance(command, ForeachRun):
        if name in (command.done_var, command.item_var):
            return command
        return ForeachRun(
            command.done,
            command.pending,
            command.done_var,
            command.item_var,
            subst_command(command.body, name, value),
        )
    raise TypeError(f"not a command: {command!r}")


def walk(command: Command) -> Iterator[Command]:
    """Pre-order traversal of the surface command tree."""
    yield command
    if isinstance(command, Let):
        yield from walk(command.body)
    elif isinstance(command, If):
        yield from walk(command.then)
        yield from walk(command.else_)
    elif isinstance(command, Seq):
        yield from walk(command.first)
        yield from walk(command.second)
    elif isinstance(command, (Select, Foreach, ForeachRun, Txn, TxnRun)):
        yield from walk(command.body)
    elif isinstance(command, Par):
        for branch in command.branches:
            yield from walk(branch)


def bind_params(body: Command, args: Tuple[Tuple[str, Any], ...]) -> Command:
    """Close a transaction body over its actual arguments."""
    for name, value in args:
        body = subst_command(body, name, value)
    return body


def is_record_set(value: Any) -> bool:
    return isinstance(value, frozenset) and all(isinstance(item, Record) for item in value)
