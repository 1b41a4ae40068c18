"""Native implementations of super-instructions, looked up by super name."""

from __future__ import annotations

import importlib
from dataclasses import dataclass
from typing import Callable

from ..errors import RegistryError
from ..ir import GraphIR, Super
from .interp import ExecContext

NativeFn = Callable[[ExecContext], None]


@dataclass(frozen=True)
class Registration:
    name: str
    fn: NativeFn
    inputs: tuple[str, ...] | None = None
    outputs: tuple[str, ...] | None = None


class Registry:
    """Maps super names to native callables.

    A native receives an :class:`ExecContext` and writes every declared
    output into ``ctx.outputs``.  Supers without a registration fall back to
    their interpreted body.
    """

    def __init__(self) -> None:
        self._entries: dict[str, Registration] = {}

    def register(self, name: str, fn: NativeFn, inputs: list[str] | tuple[str, ...] | None = None,
                 outputs: list[str] | tuple[str, ...] | None = None) -> Registration:
        if name in self._entries:
            raise RegistryError(f"super '{name}' is already registered")
        if not callable(fn):
            raise RegistryError(f"native for '{name}' is not callable")
        reg = Registration(name, fn, None if inputs is None else tuple(inputs),
                           None if outputs is None else tuple(outputs))
        self._entries[name] = reg
        return reg

    def get(self, name: str) -> Registration | None:
        return self._entries.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def names(self) -> list[str]:
        return sorted(self._entries)

    def check(self, g: GraphIR) -> None:
        """Load-time check: registered signatures must agree with the graph."""
        for inst in g.instructions:
            op = inst.op
            if not isinstance(op, Super):
                continue
            reg = self._entries.get(op.super_name)
            if reg is None:
                continue
            for what, declared, ports in (("input", reg.inputs, op.inputs),
                                          ("output", reg.outputs, op.outputs)):
                if declared is None:
                    continue
                names = tuple(p.name for p in ports)
                if len(declared) != len(names):
                    raise RegistryError(f"super '{op.super_name}': native declares "
                                        f"{len(declared)} {what}(s), graph has {len(names)}")
                if declared != names:
                    raise RegistryError(f"super '{op.super_name}': native {what}s {list(declared)} "
                                        f"do not match graph {list(names)}")


def register_super(registry: Registry, name: str, fn: NativeFn, inputs=None,
                   outputs=None) -> Registration:
    return registry.register(name, fn, inputs, outputs)


def load_natives(module_name: str, registry: Registry | None = None) -> Registry:
    """Import ``module_name`` and call its ``register(registry)`` hook."""
    registry = registry or Registry()
    try:
        mod = importlib.import_module(module_name)
    except ImportError as exc:
        raise RegistryError(f"cannot import natives module {module_name!r}: {exc}") from None
    hook = getattr(mod, "register", None)
    if hook is None:
        raise RegistryError(f"natives module {module_name!r} has no register(registry) function")
    hook(registry)
    return registry
