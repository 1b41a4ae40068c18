"""Syntax tree for the annotated C subset."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from ..errors import Loc
from ..ir import AddressExpr


@dataclass(frozen=True)
class VarRef:
    name: str
    addr: AddressExpr | None = None  # None: no '::' suffix
    prefix: str | None = None  # 'local' or 'starter'
    loc: Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Literal:
    value: object
    loc: Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str  # '!' or '-'
    operand: "Expr"
    loc: Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str  # BinOp name: add, sub, ..., and, or
    left: "Expr"
    right: "Expr"
    loc: Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Call:
    """Builtin call; only valid inside interpreted super bodies."""

    func: str
    args: tuple["Expr", ...]
    loc: Loc | None = field(default=None, compare=False)


Expr = Union[VarRef, Literal, Unary, Binary, Call]


@dataclass(frozen=True)
class Assign:
    target: str
    value: Expr
    loc: Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Stmt"
    orelse: "Stmt | None" = None
    loc: Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class While:
    cond: Expr
    body: "Stmt"
    loc: Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Return:
    value: Expr | None = None
    loc: Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Block:
    stmts: tuple["Stmt", ...]
    loc: Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class LocalDecl:
    """``type name [= expr];`` inside a super body."""

    type: str
    name: str
    init: Expr | None = None
    loc: Loc | None = field(default=None, compare=False)


Stmt = Union[Assign, If, While, Return, Block, LocalDecl]


@dataclass(frozen=True)
class RawBlock:
    text: str
    loc: Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Decl:
    type: str
    name: str
    is_parout: bool = False
    loc: Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class SuperDef:
    mode: str
    name: str
    inputs: tuple[VarRef, ...]
    outputs: tuple[str, ...]
    body: str
    explicit_name: bool = True
    loc: Loc | None = field(default=None, compare=False)
    body_loc: Loc | None = field(default=None, compare=False)


TopItem = Union[RawBlock, Decl, SuperDef, Assign, If, While, Return, Block]


@dataclass(frozen=True)
class Program:
    items: tuple[TopItem, ...]

    @property
    def decls(self) -> dict[str, Decl]:
        return {i.name: i for i in self.items if isinstance(i, Decl)}

    @property
    def supers(self) -> list[SuperDef]:
        return [i for i in self.items if isinstance(i, SuperDef)]


def walk_expr(e: Expr):
    yield e
    if isinstance(e, Unary):
        yield from walk_expr(e.operand)
    elif isinstance(e, Binary):
        yield from walk_expr(e.left)
        yield from walk_expr(e.right)
    elif isinstance(e, Call):
        for a in e.args:
            yield from walk_expr(a)


def walk_stmt(s: Stmt):
    """Yield every statement and expression nested in ``s`` (pre-order)."""
    yield s
    if isinstance(s, Assign):
        yield from walk_expr(s.value)
    elif isinstance(s, If):
        yield from walk_expr(s.cond)
        yield from walk_stmt(s.then)
        if s.orelse is not None:
            yield from walk_stmt(s.orelse)
    elif isinstance(s, While):
        yield from walk_expr(s.cond)
        yield from walk_stmt(s.body)
    elif isinstance(s, Return):
        if s.value is not None:
            yield from walk_expr(s.value)
    elif isinstance(s, Block):
        for x in s.stmts:
            yield from walk_stmt(x)
    elif isinstance(s, LocalDecl):
        if s.init is not None:
            yield from walk_expr(s.init)


def reads(node) -> set[str]:
    """Names read anywhere inside a statement or expression."""
    walker = walk_stmt if not isinstance(node, (VarRef, Literal, Unary, Binary, Call)) else walk_expr
    return {n.name for n in walker(node) if isinstance(n, VarRef)}


def writes(node) -> set[str]:
    return {n.target for n in walk_stmt(node) if isinstance(n, Assign)}


def needs_trigger(node) -> bool:
    """True if compiling ``node`` creates constants (literals, unary minus)."""
    walker = walk_stmt if not isinstance(node, (VarRef, Literal, Unary, Binary, Call)) else walk_expr
    return any(isinstance(n, Literal) or (isinstance(n, Unary) and n.op == "-")
               for n in walker(node))
