"""Interpreter for super-instruction bodies written in the C subset."""

from __future__ import annotations

import hashlib
import math
import threading
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable

from ..errors import CompileError, RuntimeFault
from ..frontend import ast as A
from ..frontend.parser import ExprStmt, parse_body
from ..values import (
    ValueError_, binop, check_value, coerce_to, default_for, kind, logical_not, wrap_int,
)


@dataclass
class ExecContext:
    """What a super-instruction sees when it fires."""

    tid: int
    n_tasks: int
    argv: list[str]
    inputs: dict[str, Any]
    outputs: dict[str, Any] = field(default_factory=dict)
    name: str = ""


class BodyError(Exception):
    def __init__(self, message: str, line: int | None):
        self.message = message
        self.line = line
        super().__init__(message)


class _Return(Exception):
    pass


# -- builtins -------------------------------------------------------------------

_file_locks: dict[str, threading.Lock] = {}
_file_locks_guard = threading.Lock()
_BURN_BUF = b"\0" * 65536


def burn_ms(ms) -> None:
    """Busy-spin for ``ms`` milliseconds of this thread's CPU time.

    Hashing releases the GIL, so concurrent burns really run in parallel on
    a multi-core host.  CPU time (not wall time) keeps the cost honest on an
    oversubscribed host: four burns on one core take four times as long.
    """
    deadline = time.thread_time() + _num(ms) / 1000.0
    while time.thread_time() < deadline:
        hashlib.sha256(_BURN_BUF).digest()


def _num(v) -> float:
    if kind(v) not in ("int", "float"):
        raise ValueError_(f"expected a number, got {kind(v)}")
    return v


def _to_int(v) -> int:
    k = kind(v)
    if k == "int":
        return v
    if k == "bool":
        return int(v)
    if k == "float":
        if math.isnan(v) or math.isinf(v):
            raise ValueError_(f"cannot convert {v} to int")
        return wrap_int(int(v))
    if k == "string":
        try:
            return wrap_int(int(v.strip()))
        except ValueError:
            raise ValueError_(f"cannot convert {v!r} to int") from None
    raise ValueError_(f"cannot convert {k} to int")


def _to_float(v) -> float:
    k = kind(v)
    if k in ("int", "float", "bool"):
        return float(v)
    if k == "string":
        try:
            return float(v.strip())
        except ValueError:
            raise ValueError_(f"cannot convert {v!r} to float") from None
    raise ValueError_(f"cannot convert {k} to float")


def _len(v) -> int:
    if kind(v) not in ("list", "string"):
        raise ValueError_(f"len() needs a list or string, got {kind(v)}")
    return len(v)


def _get(lst, i):
    if kind(lst) not in ("list", "string") or kind(i) != "int":
        raise ValueError_("get() needs (list, int)")
    if not 0 <= i < len(lst):
        raise ValueError_(f"index {i} out of range for length {len(lst)}")
    return lst[i]


def _append(lst, v):
    if kind(lst) != "list":
        raise ValueError_(f"append() needs a list, got {kind(lst)}")
    return check_value(lst + [v])


def _concat(a, b):
    if kind(a) == kind(b) and kind(a) in ("list", "string"):
        return a + b
    raise ValueError_(f"concat() needs two strings or two lists, got {kind(a)} and {kind(b)}")


def read_lines(path) -> list[str]:
    if kind(path) != "string":
        raise ValueError_("read_lines() needs a path string")
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise ValueError_(f"cannot read {path!r}: {exc.strerror}") from None


def write_line(path, s) -> None:
    if kind(path) != "string" or kind(s) != "string":
        raise ValueError_("write_line() needs (path, string)")
    with _file_locks_guard:
        lock = _file_locks.setdefault(path, threading.Lock())
    with lock:
        try:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(s + "\n")
        except OSError as exc:
            raise ValueError_(f"cannot write {path!r}: {exc.strerror}") from None


def _math(fn: Callable[..., float], name: str):
    def wrapped(*args):
        try:
            return float(fn(*(_num(a) for a in args)))
        except (ValueError, OverflowError) as exc:
            raise ValueError_(f"{name}(): {exc}") from None
    return wrapped


def _builtins(ctx: ExecContext) -> dict[str, Callable]:
    def argv(i):
        if kind(i) != "int" or not 0 <= i < len(ctx.argv):
            raise ValueError_(f"treb_argv({i}) out of range: {len(ctx.argv)} argument(s)")
        return ctx.argv[i]

    return {
        "treb_get_tid": lambda: ctx.tid,
        "treb_get_n_tasks": lambda: ctx.n_tasks,
        "treb_argv": argv,
        "treb_argc": lambda: len(ctx.argv),
        **STATELESS_BUILTINS,
    }


STATELESS_BUILTINS: dict[str, Callable] = {
    "len": _len,
    "get": _get,
    "append": _append,
    "to_int": _to_int,
    "to_float": _to_float,
    "concat": _concat,
    "read_lines": read_lines,
    "write_line": write_line,
    "exp": _math(math.exp, "exp"),
    "log": _math(math.log, "log"),
    "sqrt": _math(math.sqrt, "sqrt"),
    "pow": _math(math.pow, "pow"),
    "erf": _math(math.erf, "erf"),
    "burn_ms": burn_ms,
}

BUILTIN_NAMES = frozenset(STATELESS_BUILTINS) | {"treb_get_tid", "treb_get_n_tasks", "treb_argv",
                                                 "treb_argc"}


# -- interpreter ------------------------------------------------------------------


@lru_cache(maxsize=256)
def compile_body(text: str) -> A.Block:
    return parse_body(text)


class BodyInterpreter:
    def __init__(self, ctx: ExecContext, input_types: dict[str, str], output_types: dict[str, str]):
        self.ctx = ctx
        self.funcs = _builtins(ctx)
        self.types: dict[str, str | None] = {}
        self.vars: dict[str, Any] = {}
        self.assigned: set[str] = set()
        for name, v in ctx.inputs.items():
            self.vars[name] = v
            self.types[name] = None  # inputs keep their runtime type
        for name, t in output_types.items():
            self.types[name] = t

    def run(self, block: A.Block) -> None:
        try:
            self.exec_stmt(block)
        except _Return:
            pass

    def exec_stmt(self, s) -> None:
        line = s.loc.line if getattr(s, "loc", None) else None
        try:
            if isinstance(s, A.Block):
                for x in s.stmts:
                    self.exec_stmt(x)
            elif isinstance(s, A.Assign):
                self.assign(s.target, self.eval(s.value), line)
            elif isinstance(s, A.LocalDecl):
                self.types[s.name] = s.type
                value = self.eval(s.init) if s.init is not None else default_for(s.type)
                self.vars[s.name] = coerce_to(s.type, value)
            elif isinstance(s, A.If):
                if self.truth(self.eval(s.cond)):
                    self.exec_stmt(s.then)
                elif s.orelse is not None:
                    self.exec_stmt(s.orelse)
            elif isinstance(s, A.While):
                while self.truth(self.eval(s.cond)):
                    self.exec_stmt(s.body)
            elif isinstance(s, A.Return):
                if s.value is not None:
                    raise BodyError("a super body returns no value; assign its outputs", line)
                raise _Return()
            elif isinstance(s, ExprStmt):
                self.eval(s.expr)
            else:
                raise BodyError(f"unsupported statement {type(s).__name__}", line)
        except ValueError_ as exc:
            raise BodyError(str(exc), line) from None

    def assign(self, name: str, value, line) -> None:
        if name not in self.types:
            raise BodyError(f"assignment to undeclared variable '{name}'", line)
        t = self.types[name]
        self.vars[name] = coerce_to(t, value) if t is not None else check_value(value)
        self.assigned.add(name)

    @staticmethod
    def truth(v) -> bool:
        if not isinstance(v, bool):
            raise ValueError_(f"condition must be bool, got {kind(v)}")
        return v

    def eval(self, e):
        if isinstance(e, A.Literal):
            return e.value
        if isinstance(e, A.VarRef):
            if e.name not in self.vars:
                if e.name in self.types:
                    raise ValueError_(f"output '{e.name}' read before it is assigned")
                raise ValueError_(f"unknown variable '{e.name}'")
            return self.vars[e.name]
        if isinstance(e, A.Unary):
            v = self.eval(e.operand)
            if e.op == "!":
                return logical_not(v)
            return binop("mul", -1, v)
        if isinstance(e, A.Binary):
            left = self.eval(e.left)
            if e.op in ("and", "or") and isinstance(left, bool):
                if (e.op == "and" and not left) or (e.op == "or" and left):
                    return left
            return binop(e.op, left, self.eval(e.right))
        if isinstance(e, A.Call):
            fn = self.funcs.get(e.func)
            if fn is None:
                raise ValueError_(f"unknown function '{e.func}'")
            args = [self.eval(a) for a in e.args]
            try:
                return fn(*args)
            except TypeError:
                raise ValueError_(f"wrong number of arguments to {e.func}()") from None
        raise ValueError_(f"unsupported expression {type(e).__name__}")


def interpret_body(body: str, ctx: ExecContext, input_types: dict[str, str],
                   output_types: dict[str, str]) -> dict[str, Any]:
    """Run ``body`` and return its output values (checked and coerced)."""
    try:
        block = compile_body(body)
    except CompileError as exc:
        raise RuntimeFault(f"super '{ctx.name}': body does not parse: {exc}") from None
    interp = BodyInterpreter(ctx, input_types, output_types)
    try:
        interp.run(block)
    except BodyError as exc:
        where = f" body line {exc.line}" if exc.line else ""
        raise RuntimeFault(f"super '{ctx.name}'{where}: {exc.message}") from None
    except RecursionError:
        raise RuntimeFault(f"super '{ctx.name}': expression nesting too deep") from None
    out = {}
    for name in output_types:
        if name not in interp.assigned:
            raise RuntimeFault(f"super '{ctx.name}' did not assign output '{name}'")
        out[name] = interp.vars[name]
    return out
