"""Sequential reference interpreter used as a test oracle.

It executes the syntax tree directly, statement by statement, with no
dataflow graph.  Parallel variables are plain per-instance lists; a
conditional or loop whose condition differs between instances runs under a
mask.  Arithmetic, addressing and builtins are implemented here again on
purpose so the machine is checked against independent code.
"""

from __future__ import annotations

import math

from superflow.frontend import ast as A
from superflow.frontend.parser import ExprStmt, parse_body, parse_source


class _Undef:
    def __repr__(self) -> str:
        return "UNDEF"


UNDEF = _Undef()


class Vec(list):
    """One value per instance; UNDEF where an instance never defined it."""


class OracleError(Exception):
    pass


# -- arithmetic -----------------------------------------------------------------


def _wrap(n: int) -> int:
    return (n + 2**63) % 2**64 - 2**63


def _isnum(v) -> bool:
    return type(v) in (int, float)


def apply_op(op: str, a, b):
    if op in ("and", "or"):
        assert type(a) is bool and type(b) is bool, (op, a, b)
        return (a and b) if op == "and" else (a or b)
    if op == "add" and type(a) is str and type(b) is str:
        return a + b
    if op in ("eq", "ne"):
        eq = a == b if (_isnum(a) and _isnum(b)) else (type(a) is type(b) and a == b)
        return eq if op == "eq" else not eq
    if op in ("lt", "le", "gt", "ge"):
        return {"lt": a < b, "le": a <= b, "gt": a > b, "ge": a >= b}[op]
    assert _isnum(a) and _isnum(b), (op, a, b)
    if type(a) is int and type(b) is int:
        if op in ("div", "mod") and b == 0:
            raise OracleError("division by zero")
        if op == "add":
            return _wrap(a + b)
        if op == "sub":
            return _wrap(a - b)
        if op == "mul":
            return _wrap(a * b)
        q = int(a / b) if abs(a) < 2**52 and abs(b) < 2**52 else _trunc_div(a, b)
        return _wrap(q) if op == "div" else _wrap(a - b * q)
    a, b = float(a), float(b)
    if op in ("div", "mod") and b == 0.0:
        raise OracleError("division by zero")
    return {"add": a + b, "sub": a - b, "mul": a * b, "div": a / b if b else 0.0,
            "mod": math.fmod(a, b) if b else 0.0}[op]


def _trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


# -- super bodies --------------------------------------------------------------------


class BodyRunner:
    def __init__(self, tid: int, n_tasks: int, argv: list[str], inputs: dict, outputs: dict):
        self.tid, self.n_tasks, self.argv = tid, n_tasks, argv
        self.env = dict(inputs)
        self.out_types = outputs
        self.local_types: dict[str, str] = {}
        self.done = False

    def call(self, name: str, args: list):
        table = {
            "treb_get_tid": lambda: self.tid,
            "treb_get_n_tasks": lambda: self.n_tasks,
            "treb_argv": lambda i: self.argv[i],
            "treb_argc": lambda: len(self.argv),
            "len": len,
            "get": lambda l, i: l[i],
            "append": lambda l, v: l + [v],
            "to_int": lambda v: int(v) if not isinstance(v, str) else int(v.strip()),
            "to_float": lambda v: float(v),
            "concat": lambda a, b: a + b,
            "exp": lambda x: math.exp(x),
            "log": lambda x: math.log(x),
            "sqrt": lambda x: math.sqrt(x),
            "pow": lambda x, y: math.pow(x, y),
            "erf": lambda x: math.erf(x),
            "burn_ms": lambda ms: None,
            "read_lines": lambda p: open(p, encoding="utf-8").read().splitlines(),
            "write_line": lambda p, s: None,
        }
        return table[name](*args)

    def ev(self, e):
        if isinstance(e, A.Literal):
            return e.value
        if isinstance(e, A.VarRef):
            return self.env[e.name]
        if isinstance(e, A.Unary):
            v = self.ev(e.operand)
            return (not v) if e.op == "!" else apply_op("mul", -1, v)
        if isinstance(e, A.Binary):
            left = self.ev(e.left)
            if e.op == "and" and left is False:
                return False
            if e.op == "or" and left is True:
                return True
            return apply_op(e.op, left, self.ev(e.right))
        if isinstance(e, A.Call):
            return self.call(e.func, [self.ev(a) for a in e.args])
        raise OracleError(f"bad expression {e!r}")

    def store(self, name: str, v) -> None:
        t = self.local_types.get(name) or self.out_types.get(name)
        if t == "float" and type(v) is int:
            v = float(v)
        self.env[name] = v

    def run(self, s) -> None:
        if self.done:
            return
        if isinstance(s, A.Block):
            for x in s.stmts:
                self.run(x)
        elif isinstance(s, A.Assign):
            self.store(s.target, self.ev(s.value))
        elif isinstance(s, A.LocalDecl):
            self.local_types[s.name] = s.type
            default = {"int": 0, "float": 0.0, "bool": False, "string": "", "list": []}[s.type]
            self.store(s.name, self.ev(s.init) if s.init is not None else default)
        elif isinstance(s, A.If):
            if self.ev(s.cond):
                self.run(s.then)
            elif s.orelse is not None:
                self.run(s.orelse)
        elif isinstance(s, A.While):
            while not self.done and self.ev(s.cond):
                self.run(s.body)
        elif isinstance(s, A.Return):
            self.done = True
        elif isinstance(s, ExprStmt):
            self.ev(s.expr)


# -- top level ---------------------------------------------------------------------


class Oracle:
    def __init__(self, program: A.Program, n_tasks: int, argv: list[str]):
        self.program = program
        self.n = n_tasks
        self.argv = list(argv)
        self.env: dict[str, object] = {}
        self.decls = program.decls

    # instance-aware evaluation; i is None outside per-instance contexts
    def pick(self, ref: A.VarRef, i):
        v = self.env[ref.name]
        a = ref.addr
        if a is None:
            if isinstance(v, Vec):
                assert i is not None, f"{ref.name} needs an instance"
                return v[i]
            return v
        assert isinstance(v, Vec), ref.name
        if a.kind == "const":
            return v[a.k]
        if a.kind == "lasttid":
            return v[-1]
        if a.kind == "all":
            return list(v)
        j = i if a.kind == "mytid" else (i + a.k if a.kind == "mytid+" else i - a.k)
        return v[j] if 0 <= j < len(v) else UNDEF

    def ev(self, e, i):
        if isinstance(e, A.Literal):
            return e.value
        if isinstance(e, A.VarRef):
            return self.pick(e, i)
        if isinstance(e, A.Unary):
            v = self.ev(e.operand, i)
            if v is UNDEF:
                return UNDEF
            return (not v) if e.op == "!" else apply_op("mul", -1, v)
        if isinstance(e, A.Binary):
            a, b = self.ev(e.left, i), self.ev(e.right, i)
            if a is UNDEF or b is UNDEF:
                return UNDEF
            return apply_op(e.op, a, b)
        raise OracleError(f"bad top-level expression {e!r}")

    def varies(self, e) -> bool:
        for node in A.walk_expr(e):
            if isinstance(node, A.VarRef):
                v = self.env.get(node.name)
                if node.addr is None and isinstance(v, Vec):
                    return True
                if node.addr is not None and node.addr.kind in ("mytid", "mytid+", "mytid-"):
                    return True
        return False

    def value(self, e, mask):
        """Scalar, or a Vec when under a mask or per-instance."""
        if mask is None and not self.varies(e):
            return self.ev(e, None)
        return Vec(self.ev(e, i) if (mask is None or mask[i]) else UNDEF for i in range(self.n))

    def assign(self, name: str, v, mask) -> None:
        if mask is None:
            self.env[name] = v
            return
        old = self.env.get(name, UNDEF)
        new = Vec()
        for i in range(self.n):
            if mask[i]:
                new.append(v[i] if isinstance(v, Vec) else v)
            else:
                new.append(old[i] if isinstance(old, Vec) else old)
        self.env[name] = new

    def cond_mask(self, e, mask):
        c = self.value(e, mask)
        if isinstance(c, Vec):
            return Vec((mask is None or mask[i]) and c[i] is True for i in range(self.n)), True
        return c, False

    def stmt(self, s, mask) -> object:
        if isinstance(s, A.Assign):
            self.assign(s.target, self.value(s.value, mask), mask)
        elif isinstance(s, A.Block):
            for x in s.stmts:
                r = self.stmt(x, mask)
                if r is not None:
                    return r
        elif isinstance(s, A.If):
            c, vec = self.cond_mask(s.cond, mask)
            if vec:
                base = mask or Vec(True for _ in range(self.n))
                raw = self.value(s.cond, mask)
                other = Vec(base[i] and raw[i] is False for i in range(self.n))
                self.stmt(s.then, c)
                if s.orelse is not None:
                    self.stmt(s.orelse, other)
            elif c:
                return self.stmt(s.then, mask)
            elif s.orelse is not None:
                return self.stmt(s.orelse, mask)
        elif isinstance(s, A.While):
            while True:
                c, vec = self.cond_mask(s.cond, mask)
                if vec:
                    if not any(c):
                        break
                    self.stmt(s.body, c)
                    mask = c
                else:
                    if not c:
                        break
                    self.stmt(s.body, mask)
        elif isinstance(s, A.Return):
            v = self.value(s.value, None)
            return ("ret", v)
        return None

    def super_(self, sd: A.SuperDef) -> None:
        parallel = sd.mode == "parallel"
        n = self.n if parallel else 1
        outs: list[dict] = []
        body = parse_body(sd.body)
        out_types = {o: self.decls[o].type for o in sd.outputs}
        starters = set(range(n))
        for ref in sd.inputs:
            if ref.prefix == "local":
                off = -ref.addr.k if ref.addr.kind == "mytid-" else ref.addr.k
                starters &= {i for i in range(n) if not 0 <= i + off < n}
        for i in range(n):
            inputs, ok = {}, True
            for ref in sd.inputs:
                if ref.prefix == "local":
                    off = -ref.addr.k if ref.addr.kind == "mytid-" else ref.addr.k
                    j = i + off
                    if 0 <= j < n:
                        v = outs[j][ref.name] if j < i else None
                        assert j < i, "oracle supports backward local chains only"
                    else:
                        continue
                elif ref.prefix == "starter":
                    if i not in starters:
                        continue
                    inner = ref.addr.starter
                    v = self.pick(A.VarRef(ref.name, None if inner.kind == "default" else inner), i)
                else:
                    v = self.pick(ref, i if parallel else None)
                    if v is UNDEF and ref.addr is not None and ref.addr.kind in ("mytid+", "mytid-"):
                        continue  # no producer for this instance: the port is simply absent
                if v is UNDEF or (isinstance(v, list) and any(x is UNDEF for x in v)):
                    ok = False
                inputs[ref.name] = v
            if not ok:
                outs.append({o: UNDEF for o in sd.outputs})
                continue
            runner = BodyRunner(i, self.n, self.argv, inputs, out_types)
            runner.run(body)
            outs.append({o: runner.env[o] for o in sd.outputs})
        for o in sd.outputs:
            self.env[o] = Vec(x[o] for x in outs) if parallel else outs[0][o]

    def run(self):
        for item in self.program.items:
            if isinstance(item, (A.RawBlock, A.Decl)):
                continue
            if isinstance(item, A.SuperDef):
                self.super_(item)
                continue
            r = self.stmt(item, None)
            if r is not None:
                return r[1]
        raise OracleError("program ended without return")


def run_oracle(source: str, n_tasks: int = 4, argv: list[str] | None = None):
    return Oracle(parse_source(source), n_tasks, argv or []).run()
