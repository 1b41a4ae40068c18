"""Graphviz rendering of template graphs."""

from __future__ import annotations

from .ir import GraphIR, Super, opcode_label


def _label(inst, n_tasks: int | None) -> str:
    op = inst.op
    text = f"{inst.id}:{opcode_label(op)}"
    if isinstance(op, Super) and op.mode == "parallel":
        text += f" [x{n_tasks if n_tasks is not None else 'N'}]"
    return text.replace("\\", "\\\\").replace('"', '\\"')


def emit_dot(g: GraphIR, n_tasks: int | None = None) -> str:
    """Deterministic DOT text; parallel supers get a double border."""
    lines = ["digraph G {", "  rankdir=TB;"]
    for inst in g.instructions:
        attrs = [f'label="{_label(inst, n_tasks)}"']
        if isinstance(inst.op, Super):
            attrs.append("shape=box")
            if inst.op.mode == "parallel":
                attrs.append("peripheries=2")
        elif inst.parallel:
            attrs.append("style=dashed")
        lines.append(f"  n{inst.id} [{', '.join(attrs)}];")
    for e in g.edges:
        attrs = []
        if not e.addr.is_default:
            attrs.append(f'label="{e.addr}"')
        if e.addr.local:
            attrs.append("style=dotted")
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f"  n{e.src} -> n{e.dst}{suffix};")
    lines.append("}")
    return "\n".join(lines) + "\n"
