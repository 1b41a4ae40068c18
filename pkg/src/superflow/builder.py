"""Lowering from the syntax tree to a template dataflow graph.

Variables are tracked as bindings to the instruction ports that produce
them.  Top-level control flow is compiled into simple instructions:
conditionals steer every live variable through a ``steer`` instruction,
and loops use the tagged-token schema (``tagpush`` on entry, a merged
port fed by the entry and by an ``inctag`` back edge, a ``steer`` on the
loop condition and ``tagpop`` on exit).

Constants inside a control region need a token carrying the region's tag,
so a hidden control variable (``%ctl``) is threaded through regions that
contain literals.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .errors import CompileError, SemanticError
from .frontend import ast as A
from .frontend.parser import parse_source
from .ir import (
    MYTID, AddressExpr, BinOp, Const, GraphBuilder, GraphIR, IncTag, Not, Ret, Steer, Super,
    SuperPort, TagPop, TagPush, validate_graph,
)

log = logging.getLogger(__name__)

CTL = "%ctl"


@dataclass(frozen=True)
class Binding:
    """Where a variable's current value comes from.

    ``parallel`` says the producers have one instance per task.  ``addr`` is
    set when the variable aliases a selected instance (``x = c::0``).
    ``partial`` marks values defined only on some instances.
    """

    producers: tuple[tuple[int, int], ...]
    parallel: bool = False
    addr: AddressExpr | None = None
    partial: bool = False

    @property
    def per_instance(self) -> bool:
        if self.addr is None:
            return self.parallel
        return self.addr.per_instance


@dataclass(frozen=True)
class CondUndefined:
    name: str


@dataclass(frozen=True)
class Region:
    parallel: bool = False
    ctl: Binding | None = None  # None: top level, constants fire at start-up
    top: bool = True


@dataclass
class LoopFrame:
    carried: list[str]
    pushes: dict[str, int] = field(default_factory=dict)
    incs: dict[str, int] = field(default_factory=dict)
    steers: dict[str, int] = field(default_factory=dict)
    pops: dict[str, int] = field(default_factory=dict)


Env = dict[str, "Binding | CondUndefined"]


class Builder:
    def __init__(self, program: A.Program):
        self.program = program
        self.gb = GraphBuilder()
        self.decls: dict[str, A.Decl] = {}
        self.warnings: list[str] = []
        self._start: Binding | None = None
        self.loops: list[LoopFrame] = []

    # -- entry point ------------------------------------------------------------

    def build(self) -> GraphIR:
        env: Env = {}
        region = Region()
        returned = False
        for item in self.program.items:
            if isinstance(item, A.RawBlock):
                continue
            if returned:
                raise SemanticError("unreachable code after return", getattr(item, "loc", None))
            if isinstance(item, A.Decl):
                self.decls[item.name] = item
            elif isinstance(item, A.SuperDef):
                self.compile_super(item, env)
            else:
                returned = self.compile_stmt(item, env, region)
        if not returned:
            raise SemanticError("program has no return statement")
        g = self.gb.freeze(argv=argv_hint(self.program))
        diags = validate_graph(g)
        if diags:
            d = diags[0]
            raise CompileError(d.message, d.loc)
        return g

    # -- helpers ----------------------------------------------------------------

    def start_ctl(self) -> Binding:
        if self._start is None:
            node = self.gb.add(Const(True))
            self._start = Binding(((node, 0),))
        return self._start

    def region_ctl(self, region: Region) -> Binding:
        return region.ctl if region.ctl is not None else self.start_ctl()

    def lookup(self, name: str, env: Env, loc) -> Binding:
        if name not in self.decls:
            raise SemanticError(f"use of undeclared variable '{name}'", loc)
        b = env.get(name)
        if b is None:
            raise SemanticError(f"use before definition of '{name}'", loc)
        if isinstance(b, CondUndefined):
            raise SemanticError(f"'{name}' is conditionally undefined here", loc)
        return b

    def edge_addr(self, b: Binding, user: AddressExpr | None, consumer_parallel: bool,
                  name: str, loc) -> AddressExpr:
        if user is None:
            if b.addr is not None:
                return b.addr
            if b.parallel:
                if consumer_parallel:
                    return MYTID
                raise SemanticError(f"explicit addressing required: '{name}' has one instance "
                                    "per task here", loc)
            return AddressExpr()
        return self.compose(b, user, name, loc)

    def compose(self, b: Binding, user: AddressExpr, name: str, loc) -> AddressExpr:
        if not b.parallel:
            raise SemanticError(f"'{name}' has a single instance; '::' addressing does not apply",
                                loc)
        if b.addr is None or b.addr.kind == "mytid":
            return user
        raise SemanticError(f"'{name}' already selects an instance and cannot be re-addressed", loc)

    def connect(self, b: Binding, node: int, port: int, consumer_parallel: bool,
                name: str = "value", loc=None, user: AddressExpr | None = None) -> None:
        addr = self.edge_addr(b, user, consumer_parallel, name, loc)
        for src, sport in b.producers:
            self.gb.connect(src, sport, node, port, addr)

    def check_declared(self, name: str, loc) -> A.Decl:
        d = self.decls.get(name)
        if d is None:
            raise SemanticError(f"use of undeclared variable '{name}'", loc)
        return d

    # -- expressions ------------------------------------------------------------

    def compile_expr(self, e: A.Expr, env: Env, region: Region) -> Binding:
        if isinstance(e, A.Literal):
            if region.ctl is None:
                node = self.gb.add(Const(e.value), loc=e.loc)
                return Binding(((node, 0),))
            node = self.gb.add(Const(e.value, triggered=True), region.parallel, e.loc)
            self.connect(region.ctl, node, 0, region.parallel, CTL, e.loc)
            return Binding(((node, 0),), region.parallel)
        if isinstance(e, A.VarRef):
            b = self.lookup(e.name, env, e.loc)
            decl = self.decls[e.name]
            if e.addr is None:
                if decl.is_parout and b.parallel and b.addr is None:
                    raise SemanticError(f"explicit addressing required: '{e.name}' is a "
                                        "treb_parout variable", e.loc)
                return b
            addr = self.compose(b, e.addr, e.name, e.loc)
            return Binding(b.producers, True, None if addr.kind == "mytid" else addr, b.partial)
        if isinstance(e, A.Unary):
            if e.op == "!":
                operand = self.compile_expr(e.operand, env, region)
                par = region.parallel or operand.per_instance
                node = self.gb.add(Not(), par, e.loc)
                self.connect(operand, node, 0, par, loc=e.loc)
                return Binding(((node, 0),), par)
            return self.compile_expr(A.Binary("mul", A.Literal(-1, e.loc), e.operand, e.loc),
                                     env, region)
        if isinstance(e, A.Binary):
            left = self.compile_expr(e.left, env, region)
            right = self.compile_expr(e.right, env, region)
            par = region.parallel or left.per_instance or right.per_instance
            node = self.gb.add(BinOp(e.op), par, e.loc)
            self.connect(left, node, 0, par, loc=e.loc)
            self.connect(right, node, 1, par, loc=e.loc)
            return Binding(((node, 0),), par)
        if isinstance(e, A.Call):
            raise SemanticError(f"function call '{e.func}' outside a super body", e.loc)
        raise CompileError(f"unsupported expression {type(e).__name__}")

    # -- statements -------------------------------------------------------------

    def compile_stmt(self, s: A.Stmt, env: Env, region: Region) -> bool:
        """Compile ``s``; returns True if it ends with a return."""
        if isinstance(s, A.Assign):
            decl = self.check_declared(s.target, s.loc)
            b = self.compile_expr(s.value, env, region)
            if decl.is_parout and not b.parallel:
                raise SemanticError(f"treb_parout variable '{s.target}' assigned a "
                                    "single-instance value", s.loc)
            env[s.target] = b
            return False
        if isinstance(s, A.Block):
            for i, sub in enumerate(s.stmts):
                if self.compile_stmt(sub, env, region):
                    if i != len(s.stmts) - 1:
                        raise SemanticError("unreachable code after return", s.stmts[i + 1].loc)
                    return True
            return False
        if isinstance(s, A.If):
            self.compile_conditional(s, env, region)
            return False
        if isinstance(s, A.While):
            self.compile_loop(s, env, region)
            return False
        if isinstance(s, A.Return):
            if not region.top:
                raise SemanticError("return is only supported at top level, outside if/while", s.loc)
            if s.value is None:
                raise SemanticError("top-level return needs a value", s.loc)
            b = self.compile_expr(s.value, env, region)
            if b.per_instance:
                raise SemanticError("return value must be a single instance; address it "
                                    "(e.g. '::0' or '::lasttid')", s.loc)
            node = self.gb.add(Ret(), loc=s.loc)
            self.connect(b, node, 0, False, loc=s.loc)
            return True
        if isinstance(s, A.LocalDecl):
            raise SemanticError("declarations are only allowed at top level", s.loc)
        raise CompileError(f"unsupported statement {type(s).__name__}", getattr(s, "loc", None))

    def _bound(self, name: str, env: Env) -> bool:
        return isinstance(env.get(name), Binding)

    def _merge(self, name: str, a: Binding, b: Binding, loc) -> Binding:
        if a.parallel != b.parallel or a.addr != b.addr:
            raise SemanticError(f"'{name}' has inconsistent instance arity across branches", loc)
        producers = tuple(dict.fromkeys(a.producers + b.producers))
        return Binding(producers, a.parallel, a.addr, a.partial or b.partial)

    def compile_conditional(self, s: A.If, env: Env, region: Region) -> None:
        cond = self.compile_expr(s.cond, env, region)
        if_par = region.parallel or cond.per_instance
        arms = [s.then] + ([s.orelse] if s.orelse is not None else [])
        assigned_then = A.writes(s.then)
        assigned_else = A.writes(s.orelse) if s.orelse is not None else set()
        for name in sorted(assigned_then | assigned_else):
            self.check_declared(name, s.loc)
        read = set()
        for arm in arms:
            read |= A.reads(arm)
        live = {v for v in read if self._bound(v, env)}
        passthrough = {v for v in assigned_then ^ assigned_else if self._bound(v, env)}
        steered = sorted(live | passthrough)
        use_ctl = any(A.needs_trigger(arm) for arm in arms)
        if use_ctl:
            steered.insert(0, CTL)

        then_env: Env = dict(env)
        else_env: Env = dict(env)
        for v in steered:
            b = self.region_ctl(region) if v == CTL else env[v]
            par = if_par or b.per_instance
            node = self.gb.add(Steer(), par, s.loc)
            self.connect(cond, node, 0, par, "condition", s.loc)
            self.connect(b, node, 1, par, v, s.loc)
            then_env[v] = Binding(((node, 0),), par)
            else_env[v] = Binding(((node, 1),), par)

        def arm_region(arm_env: Env) -> Region:
            ctl = arm_env[CTL] if use_ctl else None
            return Region(if_par, ctl, top=False)

        self.compile_stmt(s.then, then_env, arm_region(then_env))
        if s.orelse is not None:
            self.compile_stmt(s.orelse, else_env, arm_region(else_env))

        for v in sorted(assigned_then | assigned_else):
            t, e = then_env.get(v), else_env.get(v)
            if isinstance(t, Binding) and isinstance(e, Binding):
                env[v] = self._merge(v, t, e, s.loc)
                continue
            defined = t if isinstance(t, Binding) else e
            if if_par and isinstance(defined, Binding):
                env[v] = Binding(defined.producers, defined.parallel, defined.addr, True)
            else:
                env[v] = CondUndefined(v)

    def compile_loop(self, s: A.While, env: Env, region: Region) -> None:
        body_reads = A.reads(s.body) | A.reads(s.cond)
        body_writes = A.writes(s.body)
        for name in sorted(body_writes):
            self.check_declared(name, s.loc)
        carried = sorted(v for v in body_reads | body_writes if self._bound(v, env))
        use_ctl = A.needs_trigger(s.cond) or A.needs_trigger(s.body)
        if use_ctl:
            carried.insert(0, CTL)
        entry = {v: (self.region_ctl(region) if v == CTL else env[v]) for v in carried}
        loop_par = region.parallel or any(b.per_instance for b in entry.values())
        frame = LoopFrame(carried)
        self.loops.append(frame)

        merged: Env = dict(env)
        for v in carried:
            push = self.gb.add(TagPush(), loop_par, s.loc)
            self.connect(entry[v], push, 0, loop_par, v, s.loc)
            inc = self.gb.add(IncTag(), loop_par, s.loc)
            frame.pushes[v], frame.incs[v] = push, inc
            merged[v] = Binding(((push, 0), (inc, 0)), loop_par)
        cond_region = Region(loop_par, merged[CTL] if use_ctl else None, top=False)
        cond = self.compile_expr(s.cond, merged, cond_region)
        if cond.per_instance and not loop_par:
            raise SemanticError("loop condition varies per instance but the loop state does not",
                                s.loc)

        body_env: Env = dict(env)
        for v in carried:
            st = self.gb.add(Steer(), loop_par, s.loc)
            self.connect(cond, st, 0, loop_par, "condition", s.loc)
            self.connect(merged[v], st, 1, loop_par, v, s.loc)
            frame.steers[v] = st
            body_env[v] = Binding(((st, 0),), loop_par)
        body_region = Region(loop_par, body_env[CTL] if use_ctl else None, top=False)
        self.compile_stmt(s.body, body_env, body_region)

        for v in carried:
            final = body_env.get(v)
            if not isinstance(final, Binding):
                raise SemanticError(f"'{v}' is conditionally undefined at the end of the loop body",
                                    s.loc)
            if final.parallel and not loop_par and final.addr is None:
                raise SemanticError(f"'{v}' becomes per-instance inside a single-instance loop",
                                    s.loc)
            self.connect(final, frame.incs[v], 0, loop_par, v, s.loc)
        for v in carried:
            if v in body_writes:
                pop = self.gb.add(TagPop(), loop_par, s.loc)
                self.gb.connect(frame.steers[v], 1, pop, 0, MYTID if loop_par else AddressExpr())
                frame.pops[v] = pop
                env[v] = Binding(((pop, 0),), loop_par)
        for v in body_writes:
            if v not in carried:
                env[v] = CondUndefined(v)
        if not any(v in body_writes for v in carried if v != CTL):
            msg = f"{s.loc}: possibly non-terminating loop: the body updates no loop state"
            self.warnings.append(msg)
            log.warning(msg)
        self.loops.pop()

    # -- super-instructions -------------------------------------------------------

    def compile_super(self, sd: A.SuperDef, env: Env) -> None:
        parallel = sd.mode == "parallel"
        in_ports = []
        for ref in sd.inputs:
            decl = self.decls.get(ref.name)
            if decl is None:
                raise SemanticError(f"input '{ref.name}' of super '{sd.name}' must be declared "
                                    "before use", ref.loc)
            in_ports.append(SuperPort(ref.name, decl.type))
        out_ports = []
        for name in sd.outputs:
            decl = self.decls.get(name)
            if decl is None:
                raise SemanticError(f"output '{name}' of super '{sd.name}' must be declared "
                                    "before use", sd.loc)
            if parallel and not decl.is_parout:
                raise SemanticError(f"output '{name}' of parallel super '{sd.name}' must be "
                                    "declared treb_parout", sd.loc)
            out_ports.append(SuperPort(name, decl.type))
        op = Super(sd.name, sd.mode, sd.body, tuple(in_ports), tuple(out_ports))
        node = self.gb.add(op, parallel, sd.loc)
        for port, ref in enumerate(sd.inputs):
            if ref.prefix == "local":
                self.gb.connect(node, sd.outputs.index(ref.name), node, port, ref.addr)
                continue
            b = self.lookup(ref.name, env, ref.loc)
            if ref.prefix == "starter":
                inner = ref.addr.starter
                user = None if inner.kind == "default" else inner
                resolved = self.edge_addr(b, user, parallel, ref.name, ref.loc)
                addr = AddressExpr(starter=resolved)
                for src, sport in b.producers:
                    self.gb.connect(src, sport, node, port, addr)
                continue
            decl = self.decls[ref.name]
            if ref.addr is None and decl.is_parout and b.parallel and b.addr is None:
                raise SemanticError(f"explicit addressing required: '{ref.name}' is a "
                                    "treb_parout variable", ref.loc)
            self.connect(b, node, port, parallel, ref.name, ref.loc, ref.addr)
        for j, name in enumerate(sd.outputs):
            env[name] = Binding(((node, j),), parallel)


_ARGV = re.compile(r"treb_argv\s*\(\s*(\d+)\s*\)")


def argv_hint(program: A.Program) -> int:
    hint = 0
    for sd in program.supers:
        for m in _ARGV.finditer(sd.body):
            hint = max(hint, int(m.group(1)) + 1)
    return hint


def build_graph(program: A.Program, warnings: list[str] | None = None) -> GraphIR:
    b = Builder(program)
    g = b.build()
    if warnings is not None:
        warnings.extend(b.warnings)
    return g


def compile_source(source: str, filename: str | None = None,
                   warnings: list[str] | None = None) -> GraphIR:
    """Parse and lower ``source``; errors carry ``filename`` when given."""
    try:
        return build_graph(parse_source(source), warnings)
    except CompileError as exc:
        if filename:
            raise exc.with_filename(filename) from None
        raise
