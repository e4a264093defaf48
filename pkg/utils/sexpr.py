"""Positioned s-expression reader for ``.sx`` sources."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Tuple, Union

from models.errors import ParseError

DELIMITERS = " \t\r\n;()"


@dataclass(frozen=True)
class Atom:
    text: str
    line: int
    column: int

    @property
    def is_int(self) -> bool:
        body = self.text[1:] if self.text[:1] == "-" else self.text
        return body.isdigit()

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class SList:
    items: Tuple["SExpr", ...]
    line: int
    column: int

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, index):
        return self.items[index]

    def __iter__(self) -> Iterator["SExpr"]:
        return iter(self.items)

    @property
    def head(self) -> str:
        if self.items and isinstance(self.items[0], Atom):
            return self.items[0].text
        return ""

    def __str__(self) -> str:
        return "(" + " ".join(str(item) for item in self.items) + ")"


SExpr = Union[Atom, SList]


def _tokens(text: str, source: str) -> Iterator[Tuple[str, int, int]]:
    line, column, index = 1, 1, 0
    while index < len(text):
        char = text[index]
        if char == "\n":
            line, column, index = line + 1, 1, index + 1
            continue
        if char in " \t\r":
            column, index = column + 1, index + 1
            continue
        if char == ";":
            while index < len(text) and text[index] != "\n":
                index += 1
            continue
        if char in "()":
            yield char, line, column
            column, index = column + 1, index + 1
            continue
        if char == '"':
            raise ParseError("string literals are not supported", line=line, column=column, source=source)
        start = index
        while index < len(text) and text[index] not in DELIMITERS:
            index += 1
        yield text[start:index], line, column
        column += index - start


def read_all(text: str, source: str = "<input>") -> List[SExpr]:
    """Every top-level form of ``text``; unbalanced parentheses are a ParseError."""
    stack: List[Tuple[List[SExpr], int, int]] = [([], 0, 0)]
    for token, line, column in _tokens(text, source):
        if token == "(":
            stack.append(([], line, column))
        elif token == ")":
            if len(stack) == 1:
                raise ParseError("unexpected ')'", line=line, column=column, source=source)
            items, start_line, start_column = stack.pop()
            stack[-1][0].append(SList(tuple(items), start_line, start_column))
        else:
            stack[-1][0].append(Atom(token, line, column))
    if len(stack) > 1:
        _, line, column = stack[-1]
        raise ParseError("unclosed '('", line=line, column=column, source=source)
    return stack[0][0]


def read_one(text: str, source: str = "<input>") -> SExpr:
    forms = read_all(text, source)
    if len(forms) != 1:
        raise ParseError(f"expected one form, found {len(forms)}", line=1, column=1, source=source)
    return forms[0]
