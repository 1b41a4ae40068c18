"""Textual ``.fl`` assembly: the contract between compiler and machine.

Layout::

    flv 1
    argv <n>
    inst <id> <opcode> [key=value ...]
    edge <src>.<port> -> <dst>.<port> addr=<address> [local] [starter=<address>]
    body <id> <nbytes>
    <nbytes of raw body text>

``#`` starts a comment line outside body blocks.  Body sizes count UTF-8
bytes, so arbitrary body text (including ``#ENDSUPER``) round-trips.
"""

from __future__ import annotations

import re

from .errors import AssemblyError, GraphError, Loc, VersionMismatch
from .ir import (
    SIMPLE_OPCODES, AddressExpr, BinOp, Const, EdgeSpec, GraphIR, Instruction, Super, SuperPort,
    validate_graph,
)
from .values import BINARY_OPS, DECLARED_TYPES, ValueError_, format_value, parse_value

FORMAT_VERSION = 1


def _ports_text(ports: tuple[SuperPort, ...]) -> str:
    return ",".join(f"{p.name}:{p.type}" for p in ports)


def _addr_text(addr: AddressExpr) -> str:
    if addr.starter is not None:
        return f"addr=default starter={addr.starter.base_text()}"
    text = f"addr={addr.base_text()}"
    return text + " local" if addr.local else text


def emit_assembly(g: GraphIR) -> str:
    """Serialize ``g``; output is deterministic (id order, then edge order)."""
    lines = [f"flv {FORMAT_VERSION}", f"argv {g.argv}"]
    for inst in g.instructions:
        op = inst.op
        parts = [f"inst {inst.id} {op.name}"]
        if isinstance(op, Super):
            parts.append(f"name={op.super_name} mode={op.mode} in={op.n_in} out={op.n_out}")
            parts.append(f"ins={_ports_text(op.inputs)} outs={_ports_text(op.outputs)}")
        elif inst.parallel:
            parts.append("mode=parallel")
        if inst.loc is not None:
            parts.append(f"loc={inst.loc}")
        if isinstance(op, Const):
            if op.triggered:
                parts.append("trig=1")
            parts.append(f"val={format_value(op.value)}")  # last: may contain spaces
        lines.append(" ".join(parts))
    for e in g.edges:
        lines.append(f"edge {e.src}.{e.src_port} -> {e.dst}.{e.dst_port} {_addr_text(e.addr)}")
    out = "\n".join(lines) + "\n"
    for inst in g.instructions:
        if isinstance(inst.op, Super):
            body = inst.op.body.encode("utf-8")
            out += f"body {inst.id} {len(body)}\n{inst.op.body}\n"
    return out


_ADDR = re.compile(r"^(default|all|mytid|lasttid|\d+|mytid[+-]\d+)$")


def parse_addr(text: str) -> AddressExpr:
    if not _ADDR.match(text):
        raise ValueError(f"bad address {text!r}")
    if text.isdigit():
        return AddressExpr("const", int(text))
    if text.startswith("mytid") and len(text) > 5:
        return AddressExpr(text[:6], int(text[6:]))
    return AddressExpr(text)


def _parse_ports(text: str, lineno: int) -> tuple[SuperPort, ...]:
    if not text:
        return ()
    ports = []
    for item in text.split(","):
        name, _, typ = item.partition(":")
        if not name.isidentifier() or typ not in DECLARED_TYPES:
            raise AssemblyError(f"bad port signature {item!r}", lineno)
        ports.append(SuperPort(name, typ))
    return tuple(ports)


def _parse_inst(rest: str, lineno: int) -> Instruction:
    head, has_val, tail = rest.partition(" val=")
    fields = head.split()
    if len(fields) < 2:
        raise AssemblyError("expected 'inst <id> <opcode>'", lineno)
    try:
        node_id = int(fields[0])
    except ValueError:
        raise AssemblyError(f"bad instruction id {fields[0]!r}", lineno) from None
    opname = fields[1]
    kv: dict[str, str] = {}
    for f in fields[2:]:
        key, eq, value = f.partition("=")
        if not eq:
            raise AssemblyError(f"expected key=value, found {f!r}", lineno)
        kv[key] = value
    loc = None
    if "loc" in kv:
        m = re.fullmatch(r"(\d+):(\d+)", kv.pop("loc"))
        if not m:
            raise AssemblyError("bad loc", lineno)
        loc = Loc(int(m.group(1)), int(m.group(2)))
    parallel = False
    if opname == "const":
        if not has_val:
            raise AssemblyError("const needs val=", lineno)
        try:
            value = parse_value(tail)
        except ValueError_ as exc:
            raise AssemblyError(f"bad const value: {exc}", lineno) from None
        trig = kv.pop("trig", "0") == "1"
        parallel = kv.pop("mode", "single") == "parallel"
        op = Const(value, trig)
    elif opname == "super":
        try:
            name, mode = kv.pop("name"), kv.pop("mode")
            n_in, n_out = int(kv.pop("in")), int(kv.pop("out"))
        except (KeyError, ValueError):
            raise AssemblyError("super needs name=, mode=, in= and out=", lineno) from None
        # port signatures are optional; unnamed ports default to in<k>/out<k>: float
        ins = (_parse_ports(kv.pop("ins"), lineno) if "ins" in kv
               else tuple(SuperPort(f"in{i}", "float") for i in range(n_in)))
        outs = (_parse_ports(kv.pop("outs"), lineno) if "outs" in kv
                else tuple(SuperPort(f"out{i}", "float") for i in range(n_out)))
        if len(ins) != n_in or len(outs) != n_out:
            raise AssemblyError(f"super '{name}' port lists disagree with in=/out=", lineno)
        try:
            op = Super(name, mode, "", ins, outs)
        except GraphError as exc:
            raise AssemblyError(exc.message, lineno) from None
        parallel = mode == "parallel"
    elif opname in SIMPLE_OPCODES or opname in BINARY_OPS:
        op = SIMPLE_OPCODES.get(opname) or BinOp(opname)
        parallel = kv.pop("mode", "single") == "parallel"
    else:
        raise AssemblyError(f"unknown opcode '{opname}'", lineno)
    if kv:
        raise AssemblyError(f"unknown key '{next(iter(kv))}' for {opname}", lineno)
    return Instruction(node_id, op, parallel, loc)


_EDGE = re.compile(r"^(\d+)\.(\d+)\s*->\s*(\d+)\.(\d+)\s+addr=(\S+)((?:\s+\S+)*)\s*$")


def _parse_edge(rest: str, lineno: int) -> EdgeSpec:
    m = _EDGE.match(rest)
    if not m:
        raise AssemblyError("expected 'edge <src>.<port> -> <dst>.<port> addr=<address>'", lineno)
    src, sport, dst, dport = (int(m.group(i)) for i in range(1, 5))
    try:
        base = parse_addr(m.group(5))
        local, starter = False, None
        for flag in m.group(6).split():
            if flag == "local":
                local = True
            elif flag.startswith("starter="):
                starter = parse_addr(flag[len("starter="):])
            else:
                raise ValueError(f"unknown edge flag {flag!r}")
        if starter is not None:
            if base.kind != "default" or local:
                raise ValueError("starter edges use addr=default")
            addr = AddressExpr(starter=starter)
        else:
            addr = AddressExpr(base.kind, base.k, local=local)
    except (ValueError, GraphError) as exc:
        raise AssemblyError(str(exc), lineno) from None
    return EdgeSpec(src, sport, dst, dport, addr)


def parse_assembly(text: str | bytes, validate: bool = True) -> GraphIR:
    """Parse ``.fl`` text (or its raw bytes) back into a :class:`GraphIR`."""
    data = text if isinstance(text, bytes) else text.encode("utf-8")
    pos, lineno = 0, 0
    insts: dict[int, Instruction] = {}
    inst_line: dict[int, int] = {}
    bodies: dict[int, str] = {}
    edges: list[EdgeSpec] = []
    argv = 0
    saw_header = saw_argv = False
    while pos < len(data):
        nl = data.find(b"\n", pos)
        end = len(data) if nl < 0 else nl
        raw = data[pos:end].decode("utf-8").rstrip("\r")
        pos = end + 1
        lineno += 1
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        word, _, rest = line.partition(" ")
        rest = rest.strip()
        if not saw_header:
            if word != "flv":
                raise AssemblyError("missing header: expected 'flv <version>'", lineno)
            if rest != str(FORMAT_VERSION):
                raise VersionMismatch(f"unsupported format version {rest!r} (expected "
                                      f"{FORMAT_VERSION})", lineno)
            saw_header = True
        elif word == "argv":
            if saw_argv or not rest.isdigit():
                raise AssemblyError("expected a single 'argv <n>' record", lineno)
            argv, saw_argv = int(rest), True
        elif word == "inst":
            inst = _parse_inst(rest, lineno)
            if inst.id in insts:
                raise AssemblyError(f"duplicate instruction id {inst.id}", lineno)
            insts[inst.id] = inst
            inst_line[inst.id] = lineno
        elif word == "edge":
            edges.append(_parse_edge(rest, lineno))
        elif word == "body":
            m = re.fullmatch(r"(\d+)\s+(\d+)", rest)
            if not m:
                raise AssemblyError("expected 'body <id> <nbytes>'", lineno)
            node_id, nbytes = int(m.group(1)), int(m.group(2))
            if node_id in bodies:
                raise AssemblyError(f"duplicate body for instruction {node_id}", lineno)
            chunk = data[pos:pos + nbytes]
            if len(chunk) != nbytes:
                raise AssemblyError("body block truncated", lineno)
            try:
                bodies[node_id] = chunk.decode("utf-8")
            except UnicodeDecodeError:
                raise AssemblyError("body block is not valid UTF-8", lineno) from None
            lineno += chunk.count(b"\n")
            pos += nbytes
            if data[pos:pos + 1] == b"\n":
                pos += 1
                lineno += 1
        else:
            raise AssemblyError(f"unknown record '{word}'", lineno)
    if not saw_header:
        raise AssemblyError("missing header: empty file", 1)

    n = len(insts)
    if sorted(insts) != list(range(n)):
        missing = min(set(range(n)) - set(insts)) if set(range(n)) - set(insts) else n
        raise AssemblyError(f"instruction ids must be dense from 0; id {missing} missing")
    instructions = []
    for i in range(n):
        inst = insts[i]
        if i in bodies:
            if not isinstance(inst.op, Super):
                raise AssemblyError(f"body given for non-super instruction {i}", inst_line[i])
            op = inst.op
            inst = Instruction(i, Super(op.super_name, op.mode, bodies[i], op.inputs, op.outputs),
                               inst.parallel, inst.loc)
        instructions.append(inst)
    for node_id in bodies:
        if node_id not in insts:
            raise AssemblyError(f"body for unknown instruction {node_id}")
    g = GraphIR(tuple(instructions), tuple(edges), argv)
    if validate:
        diags = validate_graph(g)
        if diags:
            raise AssemblyError(f"invalid graph: {diags[0]}")
    return g


def emit_skeleton(g: GraphIR) -> str:
    """One stub per super: the signature a native registration must match.

    Gather inputs (fed through ``::*``) are shown with a ``[]`` suffix since
    the function receives a list.
    """
    gathered = {(e.dst, e.dst_port) for e in g.edges if e.addr.kind == "all"}
    lines = []
    for inst in g.instructions:
        op = inst.op
        if not isinstance(op, Super):
            continue
        ins = ",".join(f"{p.name}:{p.type}{'[]' if (inst.id, k) in gathered else ''}"
                       for k, p in enumerate(op.inputs))
        outs = ",".join(f"{p.name}:{p.type}" for p in op.outputs)
        lines.append(f"super {op.super_name} mode={op.mode} in={ins} out={outs}")
    return "\n".join(lines) + ("\n" if lines else "")
