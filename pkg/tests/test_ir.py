from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from conftest import CORPUS, corpus_source
from superflow import compile_source, expand_instances
from superflow.errors import GraphError
from superflow.ir import (
    ALL, DEFAULT, LASTTID, MYTID, AddressExpr, GraphBuilder, IncTag, Not, Steer, TagPop, TagPush,
    const_addr, default_placement, parse_placement, random_placement, resolve_address,
    validate_graph,
)


@pytest.mark.parametrize("addr,i,p,expected", [
    (DEFAULT, 3, 1, [0]),
    (ALL, 0, 4, [0, 1, 2, 3]),
    (const_addr(2), 0, 4, [2]),
    (LASTTID, 1, 4, [3]),
    (MYTID, 2, 4, [2]),
    (AddressExpr("mytid+", 1), 3, 4, []),
    (AddressExpr("mytid+", 1), 2, 4, [3]),
    (AddressExpr("mytid-", 2), 1, 4, []),
    (AddressExpr("mytid-", 2), 3, 4, [1]),
])
def test_resolve_address_examples(addr, i, p, expected):
    assert resolve_address(addr, i, p, 4) == expected


@pytest.mark.parametrize("addr,p", [(DEFAULT, 4), (const_addr(4), 4)])
def test_resolve_address_errors(addr, p):
    with pytest.raises(GraphError):
        resolve_address(addr, 0, p, 4)


@given(st.integers(0, 40), st.integers(1, 40))
def test_resolve_address_properties(i, p):
    assert len(resolve_address(ALL, i, p, p)) == p
    assert set(resolve_address(MYTID, i, p, p)) <= {i}


def _minus_graph(k: int):
    gb = GraphBuilder()
    src = gb.add(Not(), parallel=True)
    dst = gb.add(Not(), parallel=True)
    gb.connect(src, 0, dst, 0, AddressExpr("mytid-", k))
    return gb.freeze()


@given(st.integers(1, 12), st.integers(1, 12))
def test_mytid_minus_edge_count(k, n):
    cg = expand_instances(_minus_graph(k), n)
    assert len(cg.edges) == max(0, n - k)


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_expansion_deterministic_and_placement_total(path):
    g = compile_source(path.read_text(encoding="utf-8"))
    for n in (3, 4, 6):
        a, b = expand_instances(g, n, 3), expand_instances(g, n, 3)
        assert a == b and a.placement == b.placement
        assert set(a.placement) == set(a.nodes)
        assert default_placement(a, 3) == a.placement


def test_default_placement_golden():
    cg = expand_instances(compile_source(corpus_source("pipeline")), 3, 2)
    # singles 0, 8, 9 round-robin; parallel instance i on PE i % 2
    assert cg.placement[(0, 0)] == 0 and cg.placement[(8, 0)] == 1 and cg.placement[(9, 0)] == 0
    assert [cg.placement[(1, i)] for i in range(3)] == [0, 1, 0]


def test_random_placement_is_seeded():
    cg = expand_instances(compile_source(corpus_source("mixed")), 4)
    assert random_placement(cg, 3, 5) == random_placement(cg, 3, 5)
    assert random_placement(cg, 3, 5) != random_placement(cg, 3, 6)
    assert set(random_placement(cg, 3, 5).values()) <= {0, 1, 2}


def test_parse_placement_file():
    cg = expand_instances(compile_source(corpus_source("pipeline")), 2, 2)
    pl = parse_placement("# pin everything of proc1 on PE 1\n1 1\n3.0 1  # one instance\n\n", cg, 2)
    assert pl[(1, 0)] == pl[(1, 1)] == 1 and pl[(3, 0)] == 1
    assert pl[(3, 1)] == cg.placement[(3, 1)]
    for text, msg in (("1", "expected"), ("1 5", "outside"), ("99 0", "unknown"), ("x 0", "malformed")):
        with pytest.raises(GraphError, match=msg):
            parse_placement(text, cg, 2)


# -- validation -------------------------------------------------------------------


def test_validate_rejects_untagged_cycle():
    gb = GraphBuilder()
    a = gb.add(Not())
    b = gb.add(Not())
    gb.connect(a, 0, b, 0)
    gb.connect(b, 0, a, 0)
    assert any("untagged cycle" in d.message for d in validate_graph(gb.freeze()))


def test_validate_rejects_unbalanced_tags():
    gb = GraphBuilder()
    c = gb.add(Not())
    p = gb.add(TagPush())
    s = gb.add(Steer())
    from superflow.ir import Const
    k = gb.add(Const(True))
    gb.connect(k, 0, c, 0)
    gb.connect(c, 0, p, 0)
    gb.connect(k, 0, s, 0)
    gb.connect(p, 0, s, 1)  # depth 1 and depth 0 meet at the steer
    assert any("unbalanced" in d.message for d in validate_graph(gb.freeze()))


def test_validate_rejects_parallel_default_and_unfed_port():
    gb = GraphBuilder()
    a = gb.add(Not(), parallel=True)
    b = gb.add(Not(), parallel=True)
    gb.connect(a, 0, b, 0)
    msgs = " ".join(d.message for d in validate_graph(gb.freeze()))
    assert "explicit addressing required" in msgs and "no incoming edge" in msgs


def test_validate_accepts_cycle_through_inctag():
    gb = GraphBuilder()
    from superflow.ir import Const
    k = gb.add(Const(1))
    push = gb.add(TagPush())
    inc = gb.add(IncTag())
    st_ = gb.add(Steer())
    pop = gb.add(TagPop())
    t = gb.add(Const(True))
    gb.connect(k, 0, push, 0)
    gb.connect(t, 0, st_, 0)
    gb.connect(push, 0, st_, 1)
    gb.connect(st_, 0, inc, 0)
    gb.connect(inc, 0, st_, 1)
    gb.connect(st_, 1, pop, 0)
    diags = validate_graph(gb.freeze())
    assert not any("cycle" in d.message for d in diags)
