from __future__ import annotations

import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).parent
sys.path.insert(0, str(TESTS))

PROGRAMS = TESTS.parent / "src" / "superflow" / "programs"
CORPUS = sorted(PROGRAMS.glob("*.tc"))

# expected RESULT lines at n_tasks=4, checked independently against tests/oracle.py
CORPUS_RESULTS = {
    "addressing": "RESULT i:500895",
    "arith": "RESULT f:109.625",
    "gather": "RESULT f:-0.4184463472598079",
    "hide_io": "RESULT f:15.938635300389787",
    "ifelse": "RESULT i:202012",
    "loop10": "RESULT i:5589",
    "mixed": "RESULT i:750110",
    "nested_loops": "RESULT i:313004",
    "pipeline": "RESULT f:344.0",
}


def corpus_source(name: str) -> str:
    return (PROGRAMS / f"{name}.tc").read_text(encoding="utf-8")


@pytest.fixture(params=[p.stem for p in CORPUS])
def corpus_name(request) -> str:
    return request.param
