"""Tag-matched operand store."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from ..errors import TokenCollision
from ..ir import ConcreteGraph, NodeKey

Tag = tuple[int, ...]


@dataclass(frozen=True)
class Message:
    dst: NodeKey
    port: int
    value: Any
    tag: Tag = ()
    gather_origin: int | None = None


@dataclass(frozen=True)
class Activation:
    node: NodeKey
    tag: Tag
    inputs: tuple  # one value per input port; gather ports carry a list


def format_tag(tag: Tag) -> str:
    return "[" + ",".join(str(t) for t in tag) + "]"


class PortLayout:
    """Per-node port expectations shared (read-only) by every store."""

    def __init__(self, cg: ConcreteGraph):
        self.n_in: dict[NodeKey, int] = {}
        self.expected: dict[NodeKey, frozenset[int]] = {}
        gathers = cg.gather_origins()
        self.gather: dict[NodeKey, dict[int, frozenset[int]]] = {}
        for node in cg.nodes:
            self.n_in[node] = cg.graph[node[0]].n_in
            self.expected[node] = frozenset(cg.expected_ports(node))
        for (node, port), origins in gathers.items():
            self.gather.setdefault(node, {})[port] = origins


class MatchStore:
    """Partially filled input slots per (node, tag); touched only by its owning PE."""

    def __init__(self, layout: PortLayout):
        self.layout = layout
        self.pending: dict[tuple[NodeKey, Tag], dict[int, Any]] = {}

    def match(self, msg: Message) -> Activation | None:
        key = (msg.dst, msg.tag)
        slots = self.pending.get(key)
        if slots is None:
            slots = self.pending[key] = {}
        gather = self.layout.gather.get(msg.dst)
        if gather is not None and msg.port in gather:
            bucket = slots.setdefault(msg.port, {})
            if msg.gather_origin in bucket:
                raise TokenCollision(f"token collision at node {msg.dst[0]}.{msg.dst[1]} port "
                                     f"{msg.port} tag={format_tag(msg.tag)} from instance "
                                     f"{msg.gather_origin}")
            bucket[msg.gather_origin] = msg.value
        else:
            if msg.port in slots:
                raise TokenCollision(f"token collision at node {msg.dst[0]}.{msg.dst[1]} port "
                                     f"{msg.port} tag={format_tag(msg.tag)}")
            slots[msg.port] = msg.value
        if not self._complete(msg.dst, slots, gather):
            return None
        del self.pending[key]
        return Activation(msg.dst, msg.tag, self._inputs(msg.dst, slots, gather))

    def _complete(self, node: NodeKey, slots: dict, gather) -> bool:
        for port in self.layout.expected[node]:
            if port not in slots:
                return False
            if gather is not None and port in gather and len(slots[port]) < len(gather[port]):
                return False
        return True

    def _inputs(self, node: NodeKey, slots: dict, gather) -> tuple:
        values = []
        for port in range(self.layout.n_in[node]):
            v = slots.get(port)
            if gather is not None and port in gather:
                v = [v[i] for i in sorted(v)]
            values.append(v)
        return tuple(values)

    def starved(self) -> list[tuple[NodeKey, Tag, list[int]]]:
        """Pending match sets with the ports still missing."""
        out = []
        for (node, tag), slots in sorted(self.pending.items()):
            missing = sorted(p for p in self.layout.expected[node] if p not in slots)
            out.append((node, tag, missing))
        return out


def match_operand(store: MatchStore, msg: Message) -> Activation | None:
    return store.match(msg)
