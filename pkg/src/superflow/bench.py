"""Benchmark workloads and the timing harness behind ``superflow bench``.

Three synthetic workloads:

``blackscholes_lite``
    option pricing; serial read and write chains (``local.``/``starter.``)
    around a parallel compute stage.
``pipeline_lite``
    a two-path conditional pipeline with busy-spin stage costs and a block
    size (items per task).
``imbalance``
    sixteen tasks with geometric durations, all placed on PE 0, to show
    what work stealing recovers.

Every point is the median of several runs.  Results must be identical
across all swept configurations; a mismatch raises.
"""

from __future__ import annotations

import math
import statistics
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import natives
from .builder import compile_source
from .ir import ConcreteGraph, GraphIR, NodeKey, default_placement, expand_instances
from .runtime import Registry, RunConfig, run_program

BLACKSCHOLES_TC = r"""
// Option pricing: read chain, parallel pricing, write chain, exact total.
string path;
int nopt;
int reps;
string outpath;
bool go;
treb_parout list rd;
treb_parout list price;
treb_parout int wr;
float total;

treb_super single name(bs_init) input() output(path, nopt, reps, outpath, go)
#BEGINSUPER
path = treb_argv(0);
nopt = to_int(treb_argv(1));
reps = to_int(treb_argv(2));
outpath = treb_argv(3);
go = true;
#ENDSUPER

treb_super parallel name(bs_read) input(starter.go, local.rd::(mytid - 1), path, nopt) output(rd)
#BEGINSUPER
int t = treb_get_tid();
int nt = treb_get_n_tasks();
int lo = nopt * t / nt;
int hi = nopt * (t + 1) / nt;
list lines = read_lines(path);
list data;
int i = lo * 6;
while (i < hi * 6) { data = append(data, to_float(get(lines, i))); i = i + 1; }
rd = data;
#ENDSUPER

treb_super parallel name(bs_compute) input(rd::mytid, reps) output(price)
#BEGINSUPER
list out;
int i = 0;
while (i < len(rd) / 6) {
    float s = get(rd, 6 * i);
    float k = get(rd, 6 * i + 1);
    float r = get(rd, 6 * i + 2);
    float v = get(rd, 6 * i + 3);
    float t = get(rd, 6 * i + 4);
    float put = get(rd, 6 * i + 5);
    float p = 0.0;
    int rep = 0;
    while (rep < reps) {
        float sq = sqrt(t);
        float d1 = (log(s / k) + (r + 0.5 * v * v) * t) / (v * sq);
        float d2 = d1 - v * sq;
        float disc = k * exp(-r * t);
        float call = s * 0.5 * (1.0 + erf(d1 / sqrt(2.0))) - disc * 0.5 * (1.0 + erf(d2 / sqrt(2.0)));
        if (put > 0.5) { p = call - s + disc; } else { p = call; }
        rep = rep + 1;
    }
    out = append(out, p);
    i = i + 1;
}
price = out;
#ENDSUPER

treb_super parallel name(bs_write) input(starter.go, local.wr::(mytid - 1), price::mytid, outpath) output(wr)
#BEGINSUPER
int prev = 0;
if (treb_get_tid() > 0) { prev = wr; }
// no float formatting builtin: the interpreted fallback writes one marker per option
int i = 0;
while (i < len(price)) { write_line(outpath, "priced"); i = i + 1; }
wr = prev + len(price);
#ENDSUPER

treb_super single name(bs_close) input(wr::lasttid, price::*) output(total)
#BEGINSUPER
total = 0.0;
int b = 0;
while (b < len(price)) {
    list blk = get(price, b);
    int i = 0;
    while (i < len(blk)) { total = total + get(blk, i); i = i + 1; }
    b = b + 1;
}
#ENDSUPER

return total;
"""

PIPELINE_TC = r"""
// Two-path conditional pipeline with busy-spin stage costs.
int n;
float cost;
treb_parout int c;
treb_parout bool flag;
treb_parout int d;
treb_parout int e;
treb_parout int f;
int a;
int b;
int x;
int total;

treb_super single name(read) input() output(n, cost)
#BEGINSUPER
n = to_int(treb_argv(0));
cost = to_float(treb_argv(1));
#ENDSUPER

treb_super parallel name(proc1) input(n, cost) output(c, flag)
#BEGINSUPER
int t = treb_get_tid();
int lo = n * t / treb_get_n_tasks();
int hi = n * (t + 1) / treb_get_n_tasks();
int i = lo;
c = 0;
while (i < hi) { c = c + (i * i) % 97; i = i + 1; }
burn_ms(cost * (hi - lo));
flag = t % 2 == 0;
#ENDSUPER

if (flag::mytid) a = c::mytid; else b = c::mytid;

treb_super parallel name(proc2a) input(a::mytid, n, cost) output(d)
#BEGINSUPER
int t = treb_get_tid();
burn_ms(2.0 * cost * (n * (t + 1) / treb_get_n_tasks() - n * t / treb_get_n_tasks()));
d = a * 2;
#ENDSUPER

treb_super parallel name(proc2b) input(b::mytid, n, cost) output(e)
#BEGINSUPER
int t = treb_get_tid();
burn_ms(cost * (n * (t + 1) / treb_get_n_tasks() - n * t / treb_get_n_tasks()));
e = b + b;
#ENDSUPER

if (flag::mytid) x = d::mytid; else x = e::mytid;

treb_super parallel name(proc3) input(x::mytid, n, cost) output(f)
#BEGINSUPER
int t = treb_get_tid();
burn_ms(cost * (n * (t + 1) / treb_get_n_tasks() - n * t / treb_get_n_tasks()));
f = x + 1;
#ENDSUPER

treb_super single name(write) input(f::*) output(total)
#BEGINSUPER
total = 0;
int i = 0;
while (i < len(f)) { total = total + get(f, i) - 1; i = i + 1; }
#ENDSUPER

return total;
"""

IMBALANCE_TC = r"""
// Tasks of uneven length; durations in milliseconds come from argv.
int n;
treb_parout int done;
int total;

treb_super single name(start) input() output(n)
#BEGINSUPER
n = treb_argc();
#ENDSUPER

treb_super parallel name(task) input(n) output(done)
#BEGINSUPER
int t = treb_get_tid();
burn_ms(to_float(treb_argv(t % n)));
done = (t + 1) * (t + 1);
#ENDSUPER

treb_super single name(sum) input(done::*) output(total)
#BEGINSUPER
total = 0;
int i = 0;
while (i < len(done)) { total = total + get(done, i); i = i + 1; }
#ENDSUPER

return total;
"""


@dataclass
class Workload:
    name: str
    source: str
    describe: str
    argv: Callable[[dict, Path], list[str]]
    tasks: Callable[[dict, int], int]
    defaults: dict
    registry: Callable[[], Registry] = Registry
    placement: Callable[[ConcreteGraph, int], dict[NodeKey, int]] | None = None

    _graph: GraphIR | None = field(default=None, repr=False)

    @property
    def graph(self) -> GraphIR:
        if self._graph is None:
            self._graph = compile_source(self.source, f"<{self.name}>")
        return self._graph


def write_options(path: Path, n: int, seed: int = 7) -> None:
    """Synthetic option records, one field per line (6 lines per option)."""
    rng = np.random.default_rng(seed)
    cols = [rng.uniform(50, 150, n), rng.uniform(50, 150, n), rng.uniform(0.01, 0.1, n),
            rng.uniform(0.1, 0.6, n), rng.uniform(0.1, 2.0, n), rng.integers(0, 2, n)]
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(n):
            fh.write("\n".join(repr(float(c[i])) for c in cols) + "\n")


def _bs_argv(p: dict, tmp: Path) -> list[str]:
    data = tmp / "options.txt"
    if not data.exists():
        write_options(data, p["options"])
    out = tmp / "prices.txt"
    out.unlink(missing_ok=True)
    return [str(data), str(p["options"]), str(p["reps"]), str(out)]


def _bs_registry() -> Registry:
    return natives.register(Registry())


def geometric_durations(n: int, mean_ms: float, seed: int) -> list[float]:
    rng = np.random.default_rng(seed)
    draws = rng.geometric(0.35, size=n)
    return [float(d) * mean_ms * 0.35 for d in draws]


def _imbalance_placement(cg: ConcreteGraph, n_pes: int) -> dict[NodeKey, int]:
    placement = default_placement(cg, n_pes)
    for node in cg.nodes:
        if getattr(cg.graph[node[0]].op, "super_name", "") == "task":
            placement[node] = 0
    return placement


WORKLOADS: dict[str, Workload] = {
    "blackscholes_lite": Workload(
        "blackscholes_lite", BLACKSCHOLES_TC,
        "option pricing, serial read/write chains around parallel compute",
        _bs_argv, lambda p, n_pes: p["tasks"] or 8,
        {"options": 32000, "reps": 300, "tasks": 0}, _bs_registry),
    "pipeline_lite": Workload(
        "pipeline_lite", PIPELINE_TC,
        "two-path conditional pipeline with busy-spin stages",
        lambda p, tmp: [str(p["items"]), str(p["cost_ms"])],
        lambda p, n_pes: math.ceil(p["items"] / p["block"]),
        {"items": 40, "block": 5, "cost_ms": 2.0}),
    "imbalance": Workload(
        "imbalance", IMBALANCE_TC,
        "16 geometric-length tasks all placed on PE 0",
        lambda p, tmp: [f"{d:.3f}" for d in geometric_durations(16, p["mean_ms"], p["seed"])],
        lambda p, n_pes: 16,
        {"mean_ms": 20.0, "seed": 1}, Registry, _imbalance_placement),
}


@dataclass
class BenchPoint:
    n_pes: int
    times_ms: list[float]
    steals: int
    fired: int
    speedup: float = 1.0

    @property
    def median_ms(self) -> float:
        return statistics.median(self.times_ms)


@dataclass
class BenchReport:
    workload: str
    points: list[BenchPoint]
    result_line: str
    steal: bool = True
    params: dict = field(default_factory=dict)

    def table(self) -> str:
        head = f"{self.workload} (steal={'on' if self.steal else 'off'}, {self.params})"
        rows = [head, f"{'n_pes':>5} {'median_ms':>10} {'speedup':>8} {'steals':>7} {'fired':>6}"]
        for p in self.points:
            rows.append(f"{p.n_pes:>5} {p.median_ms:>10.1f} {p.speedup:>8.2f} {p.steals:>7} "
                        f"{p.fired:>6}")
        rows.append(self.result_line)
        return "\n".join(rows)

    def csv(self) -> str:
        rows = ["workload,n_pes,median_ms,speedup,steals"]
        for p in self.points:
            rows.append(f"{self.workload},{p.n_pes},{p.median_ms:.3f},{p.speedup:.4f},{p.steals}")
        return "\n".join(rows)


def run_bench(name: str, pes: list[int] | None = None, runs: int = 5, steal: bool = True,
              **params) -> BenchReport:
    """Time ``name`` at each PE count; returns medians and speedups vs the first count."""
    if name not in WORKLOADS:
        raise KeyError(f"unknown workload {name!r}; available: {', '.join(sorted(WORKLOADS))}")
    wl = WORKLOADS[name]
    p = dict(wl.defaults)
    for key, value in params.items():
        if value is not None:
            if key not in p:
                raise KeyError(f"workload {name} has no parameter {key!r}")
            p[key] = value
    pes = pes or [1, 2, 4]
    points: list[BenchPoint] = []
    results: set[str] = set()
    with tempfile.TemporaryDirectory(prefix="superflow-bench-") as tmp:
        tmpdir = Path(tmp)
        for n_pes in pes:
            cg = expand_instances(wl.graph, wl.tasks(p, n_pes), n_pes)
            placement = wl.placement(cg, n_pes) if wl.placement else None
            times, steals, fired = [], [], 0
            for run in range(runs):
                cfg = RunConfig(n_pes=n_pes, n_tasks=cg.n_tasks, steal=steal,
                                placement=placement, argv=wl.argv(p, tmpdir), seed=run)
                out = run_program(cg, wl.registry(), cfg)
                times.append(out.wall_ms)
                steals.append(out.steals)
                fired = out.fired
                results.add(out.result_line)
            points.append(BenchPoint(n_pes, times, int(statistics.median(steals)), fired))
    if len(results) != 1:
        raise RuntimeError(f"{name}: results differ across configurations: {sorted(results)}")
    base = points[0].median_ms
    for pt in points:
        pt.speedup = base / pt.median_ms if pt.median_ms > 0 else float("inf")
    return BenchReport(name, points, results.pop(), steal, p)
