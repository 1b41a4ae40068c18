"""The dataflow virtual machine.

Each PE is a worker thread with an inbox, a tag-matching store for the
nodes placed on it, and a work deque of ready activations.  Messages are
always routed to the PE hosting their destination node; only ready
activations migrate when an idle PE steals.
"""

from __future__ import annotations

import itertools
import logging
import random
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

from ..errors import Deadlock, RuntimeFault
from ..ir import (
    BinOp, ConcreteGraph, Const, GraphIR, IncTag, MAX_TAG_DEPTH, NodeKey, Not, Ret, Steer, Super,
    TagPop, TagPush, default_placement, expand_instances, random_placement,
)
from ..values import ValueError_, binop, coerce_to, format_value, kind, logical_not
from .deque import StealDeque
from .interp import ExecContext, interpret_body
from .matching import Activation, MatchStore, Message, PortLayout, format_tag
from .registry import Registry
from .termination import TerminationDetector

log = logging.getLogger(__name__)

DeliveryHook = Callable[[Message], "list[tuple[float, Message]]"]


@dataclass
class RunConfig:
    n_pes: int = 1
    n_tasks: int | None = None  # defaults to n_pes
    steal: bool = True
    placement: dict[NodeKey, int] | None = None
    placement_seed: int | None = None  # seeded random placement when no explicit map
    argv: list[str] = field(default_factory=list)
    trace: bool = False
    seed: int = 0  # victim selection
    delivery_hook: DeliveryHook | None = None  # test hook: delay, drop or duplicate messages
    timeout: float | None = None
    idle_wait: float = 0.002
    scan_interval: float = 0.005

    def __post_init__(self) -> None:
        if self.n_pes < 1:
            raise ValueError("n_pes must be at least 1")
        if self.n_tasks is not None and self.n_tasks < 1:
            raise ValueError("n_tasks must be at least 1")

    @property
    def tasks(self) -> int:
        return self.n_tasks if self.n_tasks is not None else self.n_pes


@dataclass
class PEStats:
    pe: int
    fired: int = 0
    steals: int = 0
    sent: int = 0
    received: int = 0

    def line(self) -> str:
        return f"STATS pe={self.pe} fired={self.fired} steals={self.steals} sent={self.sent}"


@dataclass
class RunOutcome:
    result: Any
    stats: list[PEStats]
    trace: list[str]
    wall_ms: float
    warnings: list[str] = field(default_factory=list)

    @property
    def result_line(self) -> str:
        return f"RESULT {format_value(self.result)}"

    @property
    def steals(self) -> int:
        return sum(s.steals for s in self.stats)

    @property
    def fired(self) -> int:
        return sum(s.fired for s in self.stats)


class PE:
    def __init__(self, pe_id: int, layout: PortLayout, seed: int):
        self.id = pe_id
        self.inbox: deque[Message] = deque()
        self.event = threading.Event()
        self.store = MatchStore(layout)
        self.dq: StealDeque[Activation] = StealDeque(pe_id)
        self.stats = PEStats(pe_id)
        self.idle = False
        self.epoch = 0
        self.trace: list[tuple[int, str]] = []
        self.rng = random.Random(f"{seed}:{pe_id}")


class Machine:
    def __init__(self, cg: ConcreteGraph, registry: Registry | None, cfg: RunConfig,
                 placement: dict[NodeKey, int]):
        self.cg = cg
        self.g: GraphIR = cg.graph
        self.registry = registry or Registry()
        self.registry.check(self.g)
        self.cfg = cfg
        self.placement = placement
        self.layout = PortLayout(cg)
        self.routes: dict[tuple[NodeKey, int], list[tuple[NodeKey, int, int | None]]] = {}
        for e in cg.edges:
            self.routes.setdefault((e.src, e.src_port), []).append(
                (e.dst, e.dst_port, e.src[1] if e.gather_origin is not None else None))
        self.pes = [PE(i, self.layout, cfg.seed) for i in range(cfg.n_pes)]
        self.seq = itertools.count()
        self.stop = False
        self.done = threading.Event()
        self.result: Any = None
        self.returned = False
        self.fault: BaseException | None = None
        self.timers: list[threading.Timer] = []
        self.timer_lock = threading.Lock()
        self.argv = list(cfg.argv)

    # -- messaging -------------------------------------------------------------

    def send(self, pe: PE, msg: Message) -> None:
        hook = self.cfg.delivery_hook
        if hook is None:
            pe.stats.sent += 1
            self.deliver(msg)
            return
        for delay, m in hook(msg):
            pe.stats.sent += 1
            if delay <= 0:
                self.deliver(m)
            else:
                t = threading.Timer(delay, self.deliver, (m,))
                t.daemon = True
                with self.timer_lock:
                    self.timers.append(t)
                t.start()

    def deliver(self, msg: Message) -> None:
        if self.stop:
            return
        target = self.pes[self.placement[msg.dst]]
        target.inbox.append(msg)
        target.event.set()

    def wake_thief(self, owner: PE) -> None:
        for q in self.pes:
            if q is not owner and q.idle:
                q.event.set()
                return

    # -- execution ----------------------------------------------------------------

    def fire(self, act: Activation) -> list[tuple[int, Any, tuple]]:
        """Execute one activation; returns (output port, value, tag) triples."""
        tid, inst_idx = act.node
        op = self.g.instructions[tid].op
        tag = act.tag
        ins = act.inputs
        if isinstance(op, BinOp):
            return [(0, binop(op.op, ins[0], ins[1]), tag)]
        if isinstance(op, Steer):
            sel = ins[0]
            if not isinstance(sel, bool):
                raise ValueError_(f"steer selector must be bool, got {kind(sel)}")
            return [(0 if sel else 1, ins[1], tag)]
        if isinstance(op, Const):
            return [(0, op.value, tag)]
        if isinstance(op, Not):
            return [(0, logical_not(ins[0]), tag)]
        if isinstance(op, TagPush):
            if len(tag) >= MAX_TAG_DEPTH:
                raise ValueError_(f"tag depth would exceed {MAX_TAG_DEPTH}")
            return [(0, ins[0], tag + (0,))]
        if isinstance(op, IncTag):
            if not tag:
                raise ValueError_("inctag on an empty tag")
            return [(0, ins[0], tag[:-1] + (tag[-1] + 1,))]
        if isinstance(op, TagPop):
            if not tag:
                raise ValueError_("tagpop on an empty tag")
            return [(0, ins[0], tag[:-1])]
        if isinstance(op, Ret):
            if tag:
                raise ValueError_("ret fired inside a loop (non-empty tag)")
            if self.returned:
                raise ValueError_("ret fired more than once")
            self.result = ins[0] if ins else None
            self.returned = True
            return []
        if isinstance(op, Super):
            outputs = self.run_super(act.node, op, ins)
            return [(j, outputs[p.name], tag) for j, p in enumerate(op.outputs)]
        raise ValueError_(f"unknown opcode {op!r}")

    def run_super(self, node: NodeKey, op: Super, ins: tuple) -> dict[str, Any]:
        expected = self.layout.expected[node]
        inputs = {p.name: ins[k] for k, p in enumerate(op.inputs) if k in expected}
        ctx = ExecContext(node[1], self.cg.n_tasks, self.argv, inputs, {}, op.super_name)
        return run_super(op, ctx, self.registry)

    def execute(self, pe: PE, act: Activation) -> None:
        seq = next(self.seq)
        if self.cfg.trace:
            pe.trace.append((seq, f"FIRE {act.node[0]}.{act.node[1]} tag={format_tag(act.tag)} "
                                  f"pe={pe.id} seq={seq}"))
        try:
            outs = self.fire(act)
        except ValueError_ as exc:
            raise RuntimeFault(f"node {act.node[0]}.{act.node[1]} "
                               f"({_label(self.g, act.node[0])}) tag={format_tag(act.tag)}: {exc}"
                               ) from None
        pe.stats.fired += 1
        for port, value, tag in outs:
            for dst, dport, origin in self.routes.get((act.node, port), ()):
                self.send(pe, Message(dst, dport, value, tag, origin))

    # -- workers ------------------------------------------------------------------

    def steal_for(self, pe: PE) -> Activation | None:
        victims = [q for q in self.pes if q is not pe and q.dq]
        if not victims:
            return None
        victim = pe.rng.choice(victims)
        act = victim.dq.steal()
        if act is not None:
            pe.stats.steals += 1
            if self.cfg.trace:
                pe.trace.append((next(self.seq), f"STEAL thief={pe.id} victim={victim.id} "
                                                 f"node={act.node[0]}.{act.node[1]}"))
        return act

    def has_work(self, pe: PE) -> bool:
        if pe.inbox or pe.dq:
            return True
        return self.cfg.steal and any(q.dq for q in self.pes if q is not pe)

    def worker(self, pe: PE) -> None:
        steal = self.cfg.steal and len(self.pes) > 1
        try:
            while not self.stop:
                pe.event.clear()
                if not self.has_work(pe):
                    pe.idle = True
                    pe.event.wait(self.cfg.idle_wait if steal else 0.05)
                    continue
                pe.idle = False
                pe.epoch += 1
                while pe.inbox:
                    msg = pe.inbox.popleft()
                    pe.stats.received += 1
                    act = pe.store.match(msg)
                    if act is not None:
                        pe.dq.push(act)
                        if steal and len(pe.dq) > 1:
                            self.wake_thief(pe)
                act = pe.dq.take_own()
                if act is None and steal:
                    act = self.steal_for(pe)
                if act is not None:
                    self.execute(pe, act)
        except BaseException as exc:  # noqa: BLE001 - any worker failure is fatal
            if self.fault is None:
                self.fault = exc
            self.stop = True
            self.done.set()
        finally:
            pe.idle = True

    def seed_startup(self) -> None:
        for node in self.cg.nodes:
            if not self.layout.expected[node]:
                inputs = tuple(None for _ in range(self.layout.n_in[node]))
                self.pes[self.placement[node]].dq.push(Activation(node, (), inputs))

    def run(self) -> RunOutcome:
        self.seed_startup()
        threads = [threading.Thread(target=self.worker, args=(pe,), name=f"pe-{pe.id}", daemon=True)
                   for pe in self.pes]
        detector = TerminationDetector(self)
        start = time.perf_counter()
        for t in threads:
            t.start()
        deadlocked = False
        deadline = None if self.cfg.timeout is None else start + self.cfg.timeout
        while True:
            if self.done.wait(self.cfg.scan_interval):
                break  # a worker failed
            verdict = detector.scan()
            if verdict == "stop":
                break
            if verdict == "deadlock":
                deadlocked = True
                break
            if deadline is not None and time.perf_counter() > deadline:
                self.fault = RuntimeFault(f"timeout after {self.cfg.timeout}s")
                break
        self.stop = True
        for pe in self.pes:
            pe.event.set()
        for t in threads:
            t.join()
        with self.timer_lock:
            for timer in self.timers:
                timer.cancel()
        wall_ms = (time.perf_counter() - start) * 1000.0
        if self.fault is None and self.returned:
            return self.outcome(wall_ms)
        if self.fault is not None:
            if isinstance(self.fault, RuntimeFault):
                raise self.fault
            raise RuntimeFault(f"{type(self.fault).__name__}: {self.fault}") from self.fault
        if deadlocked:
            raise self.deadlock_error()
        raise RuntimeFault("machine stopped without a result")

    def outcome(self, wall_ms: float) -> RunOutcome:
        trace = sorted(itertools.chain.from_iterable(pe.trace for pe in self.pes))
        warnings = list(self.cg.warnings)
        leftover = sum(len(pe.store.starved()) for pe in self.pes)
        if leftover:
            warnings.append(f"{leftover} partially matched operand set(s) left after return")
        return RunOutcome(self.result, [pe.stats for pe in self.pes], [t for _, t in trace],
                          wall_ms, warnings)

    def deadlock_error(self) -> Deadlock:
        starved = []
        for pe in self.pes:
            for node, tag, missing in pe.store.starved():
                starved.append(f"{node[0]}.{node[1]} ({_label(self.g, node[0])}) "
                               f"tag={format_tag(tag)} missing ports {missing}")
        starved.sort()
        detail = "; ".join(starved[:20]) if starved else "no pending operands"
        return Deadlock(f"deadlock: program quiescent without return; starved: {detail}", starved)


def _label(g: GraphIR, tid: int) -> str:
    op = g.instructions[tid].op
    return op.super_name if isinstance(op, Super) else op.name


def run_super(op: Super, ctx: ExecContext, registry: Registry | None = None) -> dict[str, Any]:
    """Execute a super-instruction: native if registered, else its interpreted body."""
    in_types = {p.name: p.type for p in op.inputs}
    out_types = {p.name: p.type for p in op.outputs}
    reg = registry.get(op.super_name) if registry is not None else None
    if reg is None:
        raw = interpret_body(op.body, ctx, in_types, out_types)
    else:
        try:
            reg.fn(ctx)
        except RuntimeFault:
            raise
        except Exception as exc:
            raise RuntimeFault(f"native super '{op.super_name}' failed: "
                               f"{type(exc).__name__}: {exc}") from exc
        raw = ctx.outputs
    out = {}
    for name, typ in out_types.items():
        if name not in raw:
            raise RuntimeFault(f"super '{op.super_name}' did not assign output '{name}'")
        try:
            out[name] = coerce_to(typ, raw[name])
        except ValueError_ as exc:
            raise RuntimeFault(f"super '{op.super_name}' output '{name}': {exc}") from None
    return out


def resolve_placement(cg: ConcreteGraph, cfg: RunConfig) -> dict[NodeKey, int]:
    if cfg.placement is not None:
        return cg.with_placement(cfg.placement, cfg.n_pes).placement
    if cfg.placement_seed is not None:
        return random_placement(cg, cfg.n_pes, cfg.placement_seed)
    if cg.n_pes == cfg.n_pes and cg.placement:
        return cg.placement
    return default_placement(cg, cfg.n_pes)


def run_program(cg: ConcreteGraph, registry: Registry | None = None,
                cfg: RunConfig | None = None) -> RunOutcome:
    """Run an expanded graph to completion.

    Raises :class:`Deadlock` on quiescence without ``ret`` and
    :class:`RuntimeFault` on any execution error.
    """
    cfg = cfg or RunConfig()
    machine = Machine(cg, registry, cfg, resolve_placement(cg, cfg))
    return machine.run()


def run_graph(g: GraphIR, cfg: RunConfig | None = None,
              registry: Registry | None = None) -> RunOutcome:
    """Expand ``g`` for ``cfg.tasks`` instances and run it."""
    cfg = cfg or RunConfig()
    cg = expand_instances(g, cfg.tasks, cfg.n_pes)
    for w in cg.warnings:
        log.warning(w)
    return run_program(cg, registry, cfg)
