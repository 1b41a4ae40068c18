"""A coarse-grained dataflow toolchain: compiler, assembler and virtual machine."""

from __future__ import annotations

from .assembler import emit_assembly, emit_skeleton, parse_assembly
from .builder import build_graph, compile_source
from .dot import emit_dot
from .errors import (AssemblyError, CompileError, Deadlock, GraphError, RegistryError,
                     RuntimeFault, SuperflowError, TokenCollision, VersionMismatch)
from .frontend import parse_source
from .ir import GraphIR, expand_instances, validate_graph
from .runtime import Registry, RunConfig, RunOutcome, run_graph, run_program

__version__ = "0.1.0"

__all__ = [
    "AssemblyError", "CompileError", "Deadlock", "GraphError", "GraphIR", "Registry",
    "RegistryError", "RunConfig", "RunOutcome", "RuntimeFault", "SuperflowError",
    "TokenCollision", "VersionMismatch", "build_graph", "compile_source", "emit_assembly",
    "emit_dot", "emit_skeleton", "expand_instances", "parse_assembly", "parse_source",
    "run_graph", "run_program", "validate_graph",
]
