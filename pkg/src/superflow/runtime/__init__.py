"""Dataflow virtual machine."""

from .deque import StealDeque, deque_push, deque_steal, deque_take_own
from .interp import BUILTIN_NAMES, ExecContext, burn_ms, interpret_body
from .machine import PEStats, RunConfig, RunOutcome, run_graph, run_program, run_super
from .matching import Activation, MatchStore, Message, PortLayout, format_tag, match_operand
from .registry import Registry, load_natives, register_super
from .termination import TerminationDetector, detect_termination

__all__ = [
    "Activation", "BUILTIN_NAMES", "ExecContext", "MatchStore", "Message", "PEStats", "PortLayout",
    "Registry", "RunConfig", "RunOutcome", "StealDeque", "TerminationDetector", "burn_ms",
    "deque_push", "deque_steal", "deque_take_own", "detect_termination", "format_tag",
    "interpret_body", "load_natives", "match_operand", "register_super", "run_graph",
    "run_program", "run_super",
]
