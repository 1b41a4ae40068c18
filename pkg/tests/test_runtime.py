from __future__ import annotations

import math
import threading
import time

import pytest

from conftest import CORPUS_RESULTS, corpus_source
from superflow import compile_source, expand_instances
from superflow.errors import Deadlock, RegistryError, RuntimeFault, TokenCollision
from superflow.ir import (
    ALL, BinOp, Const, GraphBuilder, Ret, Super, SuperPort,
)
from superflow.runtime import (
    Activation, ExecContext, MatchStore, Message, PortLayout, Registry, RunConfig, StealDeque,
    burn_ms, interpret_body, load_natives, match_operand, run_graph, run_program,
)
from superflow.runtime.interp import STATELESS_BUILTINS

# -- deque --------------------------------------------------------------------------


def test_deque_owner_takes_oldest_thief_takes_youngest():
    dq = StealDeque(owner=0)
    for i in range(5):
        dq.push(i)
    assert dq.take_own() == 0
    assert dq.steal() == 4
    assert dq.snapshot() == [1, 2, 3] and len(dq) == 3
    assert [dq.take_own(), dq.take_own(), dq.take_own(), dq.take_own()] == [1, 2, 3, None]
    assert dq.steal() is None and not dq


def test_deque_small_concurrent_exactly_once():
    dq: StealDeque[int] = StealDeque(0)
    n = 20000
    taken: list[list[int]] = [[] for _ in range(3)]
    done = threading.Event()

    def thief(k):
        while not done.is_set() or dq:
            x = dq.steal()
            if x is not None:
                taken[k].append(x)

    ts = [threading.Thread(target=thief, args=(k,)) for k in (1, 2)]
    for t in ts:
        t.start()
    for i in range(n):
        dq.push(i)
        if i % 3 == 0:
            x = dq.take_own()
            if x is not None:
                taken[0].append(x)
    done.set()
    for t in ts:
        t.join()
    everything = sorted(taken[0] + taken[1] + taken[2])
    assert everything == list(range(n))
    assert taken[0] == sorted(taken[0])


# -- matching ------------------------------------------------------------------------


def _adder_graph():
    gb = GraphBuilder()
    a = gb.add(Const(1))
    b = gb.add(Const(2))
    s = gb.add(BinOp("add"))
    r = gb.add(Ret())
    gb.connect(a, 0, s, 0)
    gb.connect(b, 0, s, 1)
    gb.connect(s, 0, r, 0)
    return gb.freeze()


def test_match_completes_only_with_all_ports_and_same_tag():
    cg = expand_instances(_adder_graph(), 1)
    store = MatchStore(PortLayout(cg))
    assert store.match(Message((2, 0), 0, 10, (0,))) is None
    assert store.match(Message((2, 0), 1, 20, (1,))) is None  # other tag
    act = store.match(Message((2, 0), 1, 5, (0,)))
    assert act == Activation((2, 0), (0,), (10, 5))
    assert [(n, t, m) for n, t, m in store.starved()] == [((2, 0), (1,), [0])]


def test_duplicate_token_raises_collision():
    cg = expand_instances(_adder_graph(), 1)
    store = MatchStore(PortLayout(cg))
    match_operand(store, Message((2, 0), 0, 1))
    with pytest.raises(TokenCollision, match="token collision"):
        match_operand(store, Message((2, 0), 0, 1))


def _gather_graph():
    gb = GraphBuilder()
    p = gb.add(Super("p", "parallel", "v = treb_get_tid();", (), (SuperPort("v", "int"),)), True)
    g = gb.add(Super("g", "single", "t = len(v);", (SuperPort("v", "list"),),
                     (SuperPort("t", "int"),)))
    r = gb.add(Ret())
    gb.connect(p, 0, g, 0, ALL)
    gb.connect(g, 0, r, 0)
    return gb.freeze()


def test_gather_orders_by_producer_instance():
    cg = expand_instances(_gather_graph(), 3)
    store = MatchStore(PortLayout(cg))
    assert store.match(Message((1, 0), 0, "c", (), 2)) is None
    assert store.match(Message((1, 0), 0, "a", (), 0)) is None
    with pytest.raises(TokenCollision):
        store.match(Message((1, 0), 0, "z", (), 2))
    act = store.match(Message((1, 0), 0, "b", (), 1))
    assert act.inputs == (["a", "b", "c"],)


# -- interpreter ----------------------------------------------------------------------


@pytest.mark.parametrize("name,args,expected", [
    ("len", (["a", 1],), 2),
    ("len", ("abc",), 3),
    ("get", ([5, 6, 7], 2), 7),
    ("append", ([1], 2), [1, 2]),
    ("concat", ("ab", "cd"), "abcd"),
    ("to_int", (" 42 ",), 42),
    ("to_int", (3.9,), 3),
    ("to_int", (-3.9,), -3),
    ("to_int", (True,), 1),
    ("to_float", ("2.5",), 2.5),
    ("to_float", (2,), 2.0),
    ("sqrt", (16,), 4.0),
    ("exp", (0,), 1.0),
    ("log", (math.e,), 1.0),
    ("pow", (2, 10), 1024.0),
    ("erf", (0.0,), 0.0),
])
def test_builtins(name, args, expected):
    got = STATELESS_BUILTINS[name](*args)
    assert got == expected and type(got) is type(expected)


@pytest.mark.parametrize("name,args", [
    ("get", ([1], 1)), ("len", (3,)), ("to_int", ("x",)), ("to_int", (float("nan"),)),
    ("sqrt", (-1.0,)), ("log", (0.0,)), ("concat", ("a", [1])), ("append", ("a", 1)),
])
def test_builtin_errors(name, args):
    from superflow.values import ValueError_

    with pytest.raises(ValueError_):
        STATELESS_BUILTINS[name](*args)


def test_file_builtins(tmp_path):
    p = str(tmp_path / "f.txt")
    STATELESS_BUILTINS["write_line"](p, "one")
    STATELESS_BUILTINS["write_line"](p, "two")
    assert STATELESS_BUILTINS["read_lines"](p) == ["one", "two"]


def test_burn_ms_consumes_cpu_time():
    t0 = time.thread_time()
    burn_ms(15)
    assert time.thread_time() - t0 >= 0.015


def _ctx(**inputs):
    return ExecContext(1, 4, ["7"], dict(inputs))


def test_interpret_body_basics():
    out = interpret_body("int k = 0; s = 0; while (k < n) { s = s + k; k = k + 1; }"
                         " t = treb_get_tid() * 10 + treb_get_n_tasks(); a = to_int(treb_argv(0));",
                         _ctx(n=5), {"n": "int"}, {"s": "int", "t": "int", "a": "int"})
    assert out == {"s": 10, "t": 14, "a": 7}


def test_interpret_body_int_to_float_output():
    out = interpret_body("x = 3;", _ctx(), {}, {"x": "float"})
    assert out["x"] == 3.0 and type(out["x"]) is float


def test_interpret_body_short_circuit():
    out = interpret_body("b = false && get(l, 5) > 0;", _ctx(l=[1]), {"l": "list"}, {"b": "bool"})
    assert out == {"b": False}


@pytest.mark.parametrize("body,msg", [
    ("x = 1 / 0;", "line 1"),
    ("x = 1;\ny = get(l, 9);", "line 2"),
    ("y = 1;", "did not assign output 'x'"),
    ("x = nosuch(1);", "nosuch"),
])
def test_interpret_body_errors(body, msg):
    with pytest.raises(RuntimeFault) as exc:
        interpret_body(body, ExecContext(0, 1, [], {"l": [1]}, {}, "sx"), {"l": "list"},
                       {"x": "int", "y": "int"})
    assert msg in str(exc.value) and "sx" in str(exc.value)


# -- registry -------------------------------------------------------------------------


def test_registry_duplicate_and_check():
    reg = Registry()
    reg.register("p", lambda ctx: None, [], ["v"])
    with pytest.raises(RegistryError, match="already registered"):
        reg.register("p", lambda ctx: None)
    reg.check(_gather_graph())
    bad = Registry()
    bad.register("g", lambda ctx: None, ["w"], ["t"])
    with pytest.raises(RegistryError, match="do not match"):
        bad.check(_gather_graph())
    worse = Registry()
    worse.register("g", lambda ctx: None, ["v", "w"], ["t"])
    with pytest.raises(RegistryError, match="declares 2"):
        worse.check(_gather_graph())


def test_load_natives_errors():
    with pytest.raises(RegistryError, match="cannot import"):
        load_natives("no.such.module_here")
    with pytest.raises(RegistryError, match="no register"):
        load_natives("json")
    assert "bs_compute" in load_natives("superflow.natives")


def test_native_overrides_body():
    reg = Registry()

    def g_native(ctx):
        ctx.outputs["t"] = sum(ctx.inputs["v"]) * 100

    reg.register("g", g_native, ["v"], ["t"])
    out = run_graph(_gather_graph(), RunConfig(n_pes=2, n_tasks=4), reg)
    assert out.result == 600
    assert run_graph(_gather_graph(), RunConfig(n_pes=2, n_tasks=4)).result == 4


def test_native_exception_becomes_fault():
    reg = Registry()
    reg.register("g", lambda ctx: 1 / 0)
    with pytest.raises(RuntimeFault, match="native super 'g' failed: ZeroDivisionError"):
        run_graph(_gather_graph(), RunConfig(n_pes=1, n_tasks=2), reg)


# -- machine --------------------------------------------------------------------------


def test_fire_examples():
    out = run_graph(_adder_graph(), RunConfig(n_pes=1, trace=True))
    assert out.result == 3 and out.result_line == "RESULT i:3"
    fires = [t for t in out.trace if t.startswith("FIRE")]
    assert fires[-1].startswith("FIRE 3.0 tag=[] pe=0 seq=")
    assert out.fired == 4
    assert out.stats[0].line() == f"STATS pe=0 fired=4 steals=0 sent={out.stats[0].sent}"


@pytest.mark.parametrize("name", sorted(CORPUS_RESULTS))
def test_corpus_results(name):
    g = compile_source(corpus_source(name))
    for n_pes, steal in ((1, False), (3, True)):
        out = run_graph(g, RunConfig(n_pes=n_pes, n_tasks=4, steal=steal))
        assert out.result_line == CORPUS_RESULTS[name]


def test_argv_forwarded():
    g = compile_source(corpus_source("pipeline"))
    assert run_graph(g, RunConfig(n_pes=2, n_tasks=4, argv=["7"])).result_line == "RESULT f:302.0"


def test_no_steal_reports_zero_steals():
    g = compile_source(corpus_source("mixed"))
    out = run_graph(g, RunConfig(n_pes=4, n_tasks=8, steal=False))
    assert all(s.steals == 0 for s in out.stats)


def test_exactly_once_firing_and_token_conservation():
    g = compile_source(corpus_source("nested_loops"))
    out = run_graph(g, RunConfig(n_pes=3, n_tasks=4, trace=True))
    keys = [" ".join(t.split()[1:3]) for t in out.trace if t.startswith("FIRE")]
    assert len(keys) == len(set(keys))
    assert sum(s.sent for s in out.stats) >= sum(s.received for s in out.stats)


def test_runtime_fault_names_node():
    g = compile_source("int x; int y;\nx = 0;\ny = 5 / x;\nreturn y;")
    with pytest.raises(RuntimeFault, match=r"node \d+\.0 \(div\) tag=\[\]: .*division by zero"):
        run_graph(g, RunConfig(n_pes=1))


def test_deadlock_names_starved_node():
    gb = GraphBuilder()
    c = gb.add(Const(1))
    s = gb.add(BinOp("add"))
    r = gb.add(Ret())
    gb.connect(c, 0, s, 0)
    gb.connect(s, 0, r, 0)
    cg = expand_instances(gb.freeze(), 1)  # no validation: port 1 of the add is never fed
    t0 = time.perf_counter()
    with pytest.raises(Deadlock) as exc:
        run_program(cg, None, RunConfig(n_pes=2))
    assert time.perf_counter() - t0 < 5
    assert exc.value.starved and exc.value.starved[0].startswith("1.0 (add)")
    assert "missing ports [1]" in str(exc.value)


def test_delivery_hook_delay_and_duplicate():
    g = compile_source(corpus_source("loop10"))

    def delay(msg):
        return [(0.001 if msg.tag and msg.tag[-1] % 2 else 0.0, msg)]

    out = run_graph(g, RunConfig(n_pes=2, n_tasks=4, delivery_hook=delay))
    assert out.result_line == CORPUS_RESULTS["loop10"]

    def dup(msg):
        return [(0.0, msg), (0.0, msg)]

    with pytest.raises(TokenCollision, match="token collision"):
        run_graph(g, RunConfig(n_pes=2, n_tasks=4, delivery_hook=dup))


def test_explicit_placement_and_oversubscription():
    g = compile_source(corpus_source("addressing"))
    cg = expand_instances(g, 4)
    placement = {node: 0 for node in cg.nodes}
    out = run_program(cg, None, RunConfig(n_pes=3, n_tasks=4, placement=placement, steal=False))
    assert out.result_line == CORPUS_RESULTS["addressing"]
    assert out.stats[1].fired == out.stats[2].fired == 0
    out = run_graph(g, RunConfig(n_pes=12, n_tasks=4))
    assert out.result_line == CORPUS_RESULTS["addressing"]


def test_imbalance_steals_at_least_once():
    from superflow import bench

    wl = bench.WORKLOADS["imbalance"]
    cg = expand_instances(wl.graph, 16, 4)
    cfg = RunConfig(n_pes=4, n_tasks=16, placement=bench._imbalance_placement(cg, 4),
                    argv=["5"] * 16)
    assert run_program(cg, None, cfg).steals >= 1


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(n_pes=0)
    with pytest.raises(ValueError):
        RunConfig(n_tasks=0)
