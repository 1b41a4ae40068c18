"""Template dataflow graphs, instance addressing and instance expansion.

A :class:`GraphIR` is the compiler's output: simple instructions and
super-instructions connected by :class:`EdgeSpec` records whose
:class:`AddressExpr` says which producer instances feed which consumer
instances.  :func:`expand_instances` resolves every address for a concrete
task count and yields a :class:`ConcreteGraph` the runtime can execute.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .errors import GraphError, Loc
from .values import BINARY_OPS, Value, format_value

log = logging.getLogger(__name__)

MAX_TAG_DEPTH = 16

# -- addressing -------------------------------------------------------------

ADDR_KINDS = ("default", "all", "const", "mytid", "mytid+", "mytid-", "lasttid")


@dataclass(frozen=True)
class AddressExpr:
    """Which producer instance(s) feed a consumer instance.

    ``kind`` is one of :data:`ADDR_KINDS`; ``k`` is the index for ``const``
    and the offset for ``mytid+``/``mytid-``.  ``local`` marks a dependency
    between instances of the same super-instruction.  ``starter`` holds the
    inner address of a starter operand; the outer kind is then ``default``.
    """

    kind: str = "default"
    k: int = 0
    local: bool = False
    starter: "AddressExpr | None" = None

    def __post_init__(self) -> None:
        if self.kind not in ADDR_KINDS:
            raise GraphError(f"unknown address kind {self.kind!r}")
        if self.k < 0:
            raise GraphError("address offsets must be non-negative")
        if self.local and self.kind not in ("mytid+", "mytid-"):
            raise GraphError("local addressing requires (mytid + N) or (mytid - N)")
        if self.local and self.starter is not None:
            raise GraphError("an input cannot be both local and starter")
        if self.starter is not None and (self.kind != "default" or self.starter.starter is not None
                                         or self.starter.local):
            raise GraphError("malformed starter address")

    @property
    def is_default(self) -> bool:
        return self.kind == "default" and not self.local and self.starter is None

    @property
    def per_instance(self) -> bool:
        """True when the selected producer depends on the consumer instance."""
        return self.kind in ("mytid", "mytid+", "mytid-")

    def base_text(self) -> str:
        if self.kind == "const":
            return str(self.k)
        if self.kind in ("mytid+", "mytid-"):
            return f"{self.kind}{self.k}"
        return self.kind

    def __str__(self) -> str:
        if self.starter is not None:
            return f"starter {self.starter.base_text()}"
        text = self.base_text()
        return f"local {text}" if self.local else text


DEFAULT = AddressExpr()
ALL = AddressExpr("all")
MYTID = AddressExpr("mytid")
LASTTID = AddressExpr("lasttid")


def const_addr(k: int) -> AddressExpr:
    return AddressExpr("const", k)


def resolve_address(addr: AddressExpr, consumer_instance: int, producer_arity: int,
                    n_tasks: int, loc: Loc | None = None) -> list[int]:
    """Producer instances feeding ``consumer_instance``, in ascending order.

    An empty list means "no edge", which is legal for ``mytid±k`` running
    off either end of the instance range.
    """
    if producer_arity < 1:
        raise GraphError("producer arity must be at least 1", loc)
    kind, k = addr.kind, addr.k
    if kind == "default":
        if producer_arity != 1:
            raise GraphError("explicit addressing required for a parallel producer", loc)
        return [0]
    if kind == "all":
        return list(range(producer_arity))
    if kind == "const":
        if k >= producer_arity:
            raise GraphError(f"instance index {k} out of range for {producer_arity} instance(s)", loc)
        return [k]
    if kind == "lasttid":
        return [producer_arity - 1]
    if kind == "mytid":
        j = consumer_instance
    elif kind == "mytid+":
        j = consumer_instance + k
    else:
        j = consumer_instance - k
    return [j] if 0 <= j < producer_arity else []


# -- opcodes ------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: Value
    triggered: bool = False

    name = "const"

    @property
    def n_in(self) -> int:
        return 1 if self.triggered else 0

    n_out = 1

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, Const) and self.triggered == other.triggered
                and format_value(self.value) == format_value(other.value))

    def __hash__(self) -> int:
        return hash(("const", format_value(self.value), self.triggered))


@dataclass(frozen=True)
class BinOp:
    op: str

    def __post_init__(self) -> None:
        if self.op not in BINARY_OPS:
            raise GraphError(f"unknown binary operator {self.op!r}")

    @property
    def name(self) -> str:
        return self.op

    n_in = 2
    n_out = 1


@dataclass(frozen=True)
class Not:
    name = "not"
    n_in = 1
    n_out = 1


@dataclass(frozen=True)
class Steer:
    """Routes port 1 (value) to output 0 if port 0 (selector) is true, else output 1."""

    name = "steer"
    n_in = 2
    n_out = 2


@dataclass(frozen=True)
class IncTag:
    name = "inctag"
    n_in = 1
    n_out = 1


@dataclass(frozen=True)
class TagPush:
    name = "tagpush"
    n_in = 1
    n_out = 1


@dataclass(frozen=True)
class TagPop:
    name = "tagpop"
    n_in = 1
    n_out = 1


@dataclass(frozen=True)
class Ret:
    name = "ret"
    n_in = 1
    n_out = 0


@dataclass(frozen=True)
class SuperPort:
    name: str
    type: str


@dataclass(frozen=True)
class Super:
    super_name: str
    mode: str
    body: str
    inputs: tuple[SuperPort, ...]
    outputs: tuple[SuperPort, ...]

    name = "super"

    def __post_init__(self) -> None:
        if self.mode not in ("single", "parallel"):
            raise GraphError(f"super mode must be single or parallel, not {self.mode!r}")

    @property
    def n_in(self) -> int:
        return len(self.inputs)

    @property
    def n_out(self) -> int:
        return len(self.outputs)


Opcode = Const | BinOp | Not | Steer | IncTag | TagPush | TagPop | Ret | Super

SIMPLE_OPCODES = {"not": Not(), "steer": Steer(), "inctag": IncTag(), "tagpush": TagPush(),
                  "tagpop": TagPop(), "ret": Ret()}


def opcode_label(op: Opcode) -> str:
    return op.super_name if isinstance(op, Super) else op.name


# -- graphs -----------------------------------------------------------------


@dataclass(frozen=True)
class Instruction:
    id: int
    op: Opcode
    parallel: bool = False
    loc: Loc | None = None

    @property
    def n_in(self) -> int:
        return self.op.n_in

    @property
    def n_out(self) -> int:
        return self.op.n_out


@dataclass(frozen=True)
class EdgeSpec:
    src: int
    src_port: int
    dst: int
    dst_port: int
    addr: AddressExpr = DEFAULT


@dataclass(frozen=True)
class GraphIR:
    instructions: tuple[Instruction, ...]
    edges: tuple[EdgeSpec, ...]
    argv: int = 0

    def __getitem__(self, node_id: int) -> Instruction:
        return self.instructions[node_id]

    def __len__(self) -> int:
        return len(self.instructions)

    @property
    def entry_constants(self) -> list[int]:
        return [i.id for i in self.instructions if isinstance(i.op, Const) and not i.op.triggered]

    def supers(self) -> list[Instruction]:
        return [i for i in self.instructions if isinstance(i.op, Super)]

    def in_edges(self, node_id: int) -> list[EdgeSpec]:
        return [e for e in self.edges if e.dst == node_id]

    def out_edges(self, node_id: int) -> list[EdgeSpec]:
        return [e for e in self.edges if e.src == node_id]


class GraphBuilder:
    """Mutable helper that assigns dense ids and freezes into a GraphIR."""

    def __init__(self) -> None:
        self.instructions: list[Instruction] = []
        self.edges: list[EdgeSpec] = []

    def add(self, op: Opcode, parallel: bool = False, loc: Loc | None = None) -> int:
        node_id = len(self.instructions)
        self.instructions.append(Instruction(node_id, op, parallel, loc))
        return node_id

    def connect(self, src: int, src_port: int, dst: int, dst_port: int,
                addr: AddressExpr = DEFAULT) -> None:
        self.edges.append(EdgeSpec(src, src_port, dst, dst_port, addr))

    def freeze(self, argv: int = 0) -> GraphIR:
        return GraphIR(tuple(self.instructions), tuple(self.edges), argv)


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    message: str
    node: int | None = None
    loc: Loc | None = None

    def __str__(self) -> str:
        where = f"{self.loc}: " if self.loc else ""
        node = f" (node {self.node})" if self.node is not None else ""
        return f"{where}{self.message}{node}"


def _is_parallel(g: GraphIR, node_id: int) -> bool:
    inst = g.instructions[node_id]
    if isinstance(inst.op, Super):
        return inst.op.mode == "parallel"
    return inst.parallel


def validate_graph(g: GraphIR) -> list[Diagnostic]:
    """Return every structural problem of ``g``; an empty list means well-formed."""
    diags: list[Diagnostic] = []
    n = len(g.instructions)

    def err(msg: str, node: int | None = None) -> None:
        loc = g.instructions[node].loc if node is not None and 0 <= node < n else None
        diags.append(Diagnostic(msg, node, loc))

    for idx, inst in enumerate(g.instructions):
        if inst.id != idx:
            err(f"instruction ids must be unique and dense; found id {inst.id} at position {idx}")
            return diags
        if isinstance(inst.op, Super):
            if inst.parallel != (inst.op.mode == "parallel"):
                err("super mode disagrees with instruction parallel flag", idx)
            names = [p.name for p in inst.op.inputs]
            if len(set(names)) != len(names):
                err(f"super '{inst.op.super_name}' has duplicate input names", idx)
        if isinstance(inst.op, Ret) and inst.parallel:
            err("ret cannot be a parallel instruction", idx)

    fed: dict[tuple[int, int], list[EdgeSpec]] = defaultdict(list)
    local_ports: dict[int, list[EdgeSpec]] = defaultdict(list)
    starter_dsts: set[int] = set()
    for e in g.edges:
        if not (0 <= e.src < n and 0 <= e.dst < n):
            err(f"edge {e.src}.{e.src_port} -> {e.dst}.{e.dst_port} references a missing node")
            continue
        src, dst = g.instructions[e.src], g.instructions[e.dst]
        if not 0 <= e.src_port < src.n_out:
            err(f"output port {e.src_port} out of range for {opcode_label(src.op)}", e.src)
            continue
        if not 0 <= e.dst_port < dst.n_in:
            err(f"input port {e.dst_port} out of range for {opcode_label(dst.op)}", e.dst)
            continue
        fed[(e.dst, e.dst_port)].append(e)
        a = e.addr
        if a.local:
            if e.src != e.dst or not isinstance(dst.op, Super) or dst.op.mode != "parallel":
                err("local inputs must come from the same parallel super-instruction", e.dst)
            elif a.k == 0:
                err("local dependency offset must be at least 1", e.dst)
            local_ports[e.dst].append(e)
            continue
        if a.starter is not None:
            if not isinstance(dst.op, Super) or dst.op.mode != "parallel":
                err("starter inputs are only meaningful on parallel super-instructions", e.dst)
            starter_dsts.add(e.dst)
            base = a.starter
        else:
            base = a
        if _is_parallel(g, e.src) and base.kind == "default":
            err("explicit addressing required: parallel producer feeds "
                f"{opcode_label(dst.op)} without '::' address", e.dst)
        if not _is_parallel(g, e.src):
            if base.kind == "const" and base.k > 0:
                err(f"instance index {base.k} out of range for single producer", e.dst)
            elif base.per_instance:
                err("instance addressing applied to a single-instance producer", e.dst)
    for d in sorted(starter_dsts):
        if d not in local_ports:
            err("starter input on a super-instruction without a local input", d)

    for inst in g.instructions:
        for port in range(inst.n_in):
            edges = fed.get((inst.id, port), [])
            if not edges:
                err(f"input port {port} of {opcode_label(inst.op)} has no incoming edge", inst.id)
                continue
            kinds = {e.addr.kind == "all" for e in edges}
            if len(kinds) > 1:
                err(f"input port {port} mixes '::*' with other addressing", inst.id)

    if diags:
        return diags
    diags.extend(_check_cycles(g))
    if diags:
        return diags
    diags.extend(_check_tag_depths(g))
    return diags


def _flow_edges(g: GraphIR) -> list[EdgeSpec]:
    return [e for e in g.edges if not e.addr.local]


def _check_cycles(g: GraphIR) -> list[Diagnostic]:
    """Every cycle (ignoring local edges) must pass through an IncTag.

    A cycle may cross several IncTags when carried variables are permuted
    (``a = b; b = t;``): it then spans several iterations, which is sound.
    """
    import networkx as nx

    out: list[Diagnostic] = []
    inctags = {i.id for i in g.instructions if isinstance(i.op, IncTag)}
    untagged = nx.DiGraph()
    untagged.add_nodes_from(range(len(g.instructions)))
    for e in _flow_edges(g):
        if e.src not in inctags and e.dst not in inctags:
            untagged.add_edge(e.src, e.dst)
    for comp in nx.strongly_connected_components(untagged):
        if len(comp) > 1 or any(untagged.has_edge(v, v) for v in comp):
            node = min(comp)
            out.append(Diagnostic("untagged cycle: cycle without an inctag instruction",
                                  node, g.instructions[node].loc))
    return out


def _check_tag_depths(g: GraphIR) -> list[Diagnostic]:
    """Assign every node a tag depth; push/pop must balance on all paths."""
    out: list[Diagnostic] = []
    succ: dict[int, list[int]] = defaultdict(list)
    for e in _flow_edges(g):
        succ[e.src].append(e.dst)
    depth_in: dict[int, int] = {}
    work: list[int] = []
    for inst in g.instructions:
        if inst.n_in == 0:
            depth_in[inst.id] = 0
            work.append(inst.id)
    reported: set[int] = set()
    while work:
        node = work.pop()
        d = depth_in[node]
        op = g.instructions[node].op
        if isinstance(op, TagPush):
            d_out = d + 1
        elif isinstance(op, TagPop):
            d_out = d - 1
        else:
            d_out = d
        if d_out < 0 or d_out > MAX_TAG_DEPTH:
            if node not in reported:
                reported.add(node)
                out.append(Diagnostic(f"tag depth {d_out} out of range [0, {MAX_TAG_DEPTH}]",
                                      node, g.instructions[node].loc))
            continue
        for nxt in succ[node]:
            seen = depth_in.get(nxt)
            if seen is None:
                depth_in[nxt] = d_out
                work.append(nxt)
            elif seen != d_out and nxt not in reported:
                reported.add(nxt)
                out.append(Diagnostic("unbalanced tagpush/tagpop: operands arrive at tag depths "
                                      f"{seen} and {d_out}", nxt, g.instructions[nxt].loc))
    for inst in g.instructions:
        if isinstance(inst.op, Ret) and depth_in.get(inst.id, 0) != 0 and inst.id not in reported:
            out.append(Diagnostic("ret receives an operand inside a loop (non-empty tag)",
                                  inst.id, inst.loc))
    return out


# -- concrete graphs -------------------------------------------------------------

NodeKey = tuple[int, int]


@dataclass(frozen=True)
class ConcreteEdge:
    src: NodeKey
    src_port: int
    dst: NodeKey
    dst_port: int
    gather_origin: int | None = None


@dataclass(frozen=True)
class ConcreteGraph:
    """Instance-expanded graph plus the PE placement of every node."""

    graph: GraphIR
    n_tasks: int
    nodes: tuple[NodeKey, ...]
    edges: tuple[ConcreteEdge, ...]
    n_pes: int = 1
    placement: dict[NodeKey, int] = field(default_factory=dict, compare=False, hash=False)
    # ports (per node) that stay unfed for that instance and are not waited on
    dropped_ports: dict[NodeKey, frozenset[int]] = field(default_factory=dict, compare=False,
                                                         hash=False)
    warnings: tuple[str, ...] = ()

    def arity(self, template_id: int) -> int:
        return self.n_tasks if _is_parallel(self.graph, template_id) else 1

    def expected_ports(self, node: NodeKey) -> list[int]:
        dropped = self.dropped_ports.get(node, frozenset())
        return [p for p in range(self.graph[node[0]].n_in) if p not in dropped]

    def gather_origins(self) -> dict[tuple[NodeKey, int], frozenset[int]]:
        origins: dict[tuple[NodeKey, int], set[int]] = defaultdict(set)
        for e in self.edges:
            if e.gather_origin is not None:
                origins[(e.dst, e.dst_port)].add(e.gather_origin)
        return {k: frozenset(v) for k, v in origins.items()}

    def with_placement(self, placement: dict[NodeKey, int], n_pes: int) -> "ConcreteGraph":
        missing = [n for n in self.nodes if n not in placement]
        if missing:
            raise GraphError(f"placement misses node {missing[0][0]}.{missing[0][1]}")
        bad = [n for n in self.nodes if not 0 <= placement[n] < n_pes]
        if bad:
            raise GraphError(f"node {bad[0][0]}.{bad[0][1]} placed outside 0..{n_pes - 1}")
        return ConcreteGraph(self.graph, self.n_tasks, self.nodes, self.edges, n_pes,
                             dict(placement), self.dropped_ports, self.warnings)


_CONDITIONAL_KINDS = ("mytid+", "mytid-")


def _local_offset(addr: AddressExpr) -> int:
    return -addr.k if addr.kind == "mytid-" else addr.k


def expand_instances(g: GraphIR, n_tasks: int, n_pes: int = 1) -> ConcreteGraph:
    """Expand parallel instructions to ``n_tasks`` instances and resolve every edge."""
    if n_tasks < 1:
        raise GraphError("n_tasks must be at least 1")
    warnings: list[str] = []

    def arity(node_id: int) -> int:
        return n_tasks if _is_parallel(g, node_id) else 1

    nodes = tuple((inst.id, i) for inst in g.instructions for i in range(arity(inst.id)))

    local_edges: dict[int, list[EdgeSpec]] = defaultdict(list)
    for e in g.edges:
        if e.addr.local:
            local_edges[e.dst].append(e)

    def starter_instances(node_id: int) -> list[int]:
        locs = local_edges.get(node_id)
        if not locs:
            inst = g.instructions[node_id]
            raise GraphError("starter input on a super-instruction without a local input", inst.loc)
        out = []
        for i in range(n_tasks):
            if any(not 0 <= i + _local_offset(e.addr) < n_tasks for e in locs):
                out.append(i)
        return out

    for node_id, locs in local_edges.items():
        for e in locs:
            if e.addr.k >= n_tasks:
                msg = (f"local offset {e.addr.k} >= n_tasks {n_tasks} on node {node_id}: "
                       "every instance becomes a starter")
                if msg not in warnings:
                    warnings.append(msg)
                    log.warning(msg)

    edges: list[ConcreteEdge] = []
    fed_ports: set[tuple[NodeKey, int]] = set()
    for e in g.edges:
        loc = g.instructions[e.dst].loc
        p_arity, c_arity = arity(e.src), arity(e.dst)
        if e.addr.local:
            for i in range(c_arity):
                j = i + _local_offset(e.addr)
                if 0 <= j < c_arity:
                    edges.append(ConcreteEdge((e.src, j), e.src_port, (e.dst, i), e.dst_port))
                    fed_ports.add(((e.dst, i), e.dst_port))
            continue
        if e.addr.starter is not None:
            inner = e.addr.starter
            targets = starter_instances(e.dst)
        else:
            inner = e.addr
            targets = list(range(c_arity))
        gather = inner.kind == "all"
        for i in targets:
            for j in resolve_address(inner, i, p_arity, n_tasks, loc):
                edges.append(ConcreteEdge((e.src, j), e.src_port, (e.dst, i), e.dst_port,
                                          j if gather else None))
                fed_ports.add(((e.dst, i), e.dst_port))

    # super ports fed only by instance-dependent edges may legitimately stay empty
    conditional: dict[tuple[int, int], bool] = {}
    for e in g.edges:
        key = (e.dst, e.dst_port)
        cond = e.addr.local or e.addr.starter is not None or e.addr.kind in _CONDITIONAL_KINDS
        conditional[key] = conditional.get(key, True) and cond
    dropped: dict[NodeKey, frozenset[int]] = {}
    for node in nodes:
        inst = g.instructions[node[0]]
        if not isinstance(inst.op, Super):
            continue
        ports = frozenset(p for p in range(inst.n_in)
                          if (node, p) not in fed_ports and conditional.get((inst.id, p), False))
        if ports:
            dropped[node] = ports
            if len(ports) == inst.n_in and inst.n_in > 0:
                warnings.append(f"instance {node[1]} of super '{inst.op.super_name}' has no "
                                "producers and fires once at start-up")

    cg = ConcreteGraph(g, n_tasks, nodes, tuple(edges), 1, {}, dropped, tuple(warnings))
    return cg.with_placement(default_placement(cg, n_pes), n_pes)


def default_placement(cg: ConcreteGraph, n_pes: int) -> dict[NodeKey, int]:
    """Parallel instance i goes to PE ``i % n_pes``; single nodes round-robin by id."""
    if n_pes < 1:
        raise GraphError("n_pes must be at least 1")
    placement: dict[NodeKey, int] = {}
    next_single = 0
    for tid, inst in cg.nodes:
        if _is_parallel(cg.graph, tid):
            placement[(tid, inst)] = inst % n_pes
        else:
            placement[(tid, inst)] = next_single % n_pes
            next_single += 1
    return placement


def random_placement(cg: ConcreteGraph, n_pes: int, seed: int) -> dict[NodeKey, int]:
    import random

    rng = random.Random(seed)
    return {node: rng.randrange(n_pes) for node in cg.nodes}


def parse_placement(text: str, cg: ConcreteGraph, n_pes: int) -> dict[NodeKey, int]:
    """Overlay a ``node_id pe_id`` placement file on the default placement.

    ``node_id`` may name a template node (all of its instances) or a single
    instance as ``id.inst``.
    """
    placement = default_placement(cg, n_pes)
    known = set(cg.nodes)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"placement line {lineno}: expected 'node_id pe_id'")
        node_text, pe_text = parts
        try:
            pe = int(pe_text)
            if "." in node_text:
                t, i = node_text.split(".", 1)
                targets = [(int(t), int(i))]
            else:
                t = int(node_text)
                targets = [n for n in cg.nodes if n[0] == t]
        except ValueError:
            raise GraphError(f"placement line {lineno}: malformed entry {line!r}") from None
        if not 0 <= pe < n_pes:
            raise GraphError(f"placement line {lineno}: PE {pe} outside 0..{n_pes - 1}")
        if not targets or any(n not in known for n in targets):
            raise GraphError(f"placement line {lineno}: unknown node {node_text}")
        for n in targets:
            placement[n] = pe
    return placement


def iter_supers(g: GraphIR) -> Iterable[tuple[Instruction, Super]]:
    for inst in g.instructions:
        if isinstance(inst.op, Super):
            yield inst, inst.op
