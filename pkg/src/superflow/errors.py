"""Exception hierarchy shared by the compiler and the virtual machine."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Loc:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class SuperflowError(Exception):
    """Base class for every error raised by this package."""


class CompileError(SuperflowError):
    def __init__(self, message: str, loc: Loc | None = None, filename: str | None = None):
        self.message = message
        self.loc = loc
        self.filename = filename
        super().__init__(self.format())

    def format(self) -> str:
        where = []
        if self.filename:
            where.append(self.filename)
        if self.loc is not None:
            where.append(str(self.loc))
        prefix = ":".join(where)
        return f"{prefix}: {self.message}" if prefix else self.message

    def with_filename(self, filename: str) -> "CompileError":
        err = type(self)(self.message, self.loc, filename)
        return err


class LexError(CompileError):
    pass


class ParseError(CompileError):
    pass


class SemanticError(CompileError):
    pass


class GraphError(SuperflowError):
    """A structural problem found while expanding or checking a graph."""

    def __init__(self, message: str, loc: Loc | None = None):
        self.message = message
        self.loc = loc
        super().__init__(f"{loc}: {message}" if loc else message)


class AssemblyError(SuperflowError):
    def __init__(self, message: str, line: int | None = None):
        self.message = message
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class VersionMismatch(AssemblyError):
    pass


class RegistryError(SuperflowError):
    pass


class RuntimeFault(SuperflowError):
    """Fatal error raised while the machine executes a program."""


class TokenCollision(RuntimeFault):
    pass


class Deadlock(SuperflowError):
    def __init__(self, message: str, starved: list[str] | None = None):
        self.starved = list(starved or [])
        super().__init__(message)
