"""``superflow`` command: build, run and bench."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .assembler import emit_assembly, emit_skeleton, parse_assembly
from .bench import WORKLOADS, run_bench
from .builder import compile_source
from .dot import emit_dot
from .errors import CompileError, Deadlock, SuperflowError
from .ir import expand_instances, parse_placement
from .runtime import RunConfig, load_natives, run_program

EXIT_OK, EXIT_ERROR, EXIT_DEADLOCK = 0, 1, 2


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_build(args: argparse.Namespace) -> int:
    src = Path(args.source)
    try:
        text = src.read_text(encoding="utf-8")
    except OSError as exc:
        _err(f"{src}: cannot read: {exc.strerror}")
        return EXIT_ERROR
    warnings: list[str] = []
    try:
        g = compile_source(text, str(src), warnings)
    except CompileError as exc:
        _err(exc.format())
        return EXIT_ERROR
    except SuperflowError as exc:
        _err(f"{src}: {exc}")
        return EXIT_ERROR
    for w in warnings:
        _err(f"{src}: warning: {w}")
    out_dir = Path(args.out_dir) if args.out_dir else src.parent
    stem = src.stem
    # render everything first so a failure leaves no partial outputs behind
    outputs = {out_dir / f"{stem}.fl": emit_assembly(g)}
    if args.dot:
        outputs[out_dir / f"{stem}.dot"] = emit_dot(g, args.tasks)
    if args.skeleton:
        outputs[out_dir / f"{stem}.skel"] = emit_skeleton(g)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path, body in outputs.items():
        path.write_text(body, encoding="utf-8")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    try:
        g = parse_assembly(Path(args.program).read_bytes(), validate=not args.no_validate)
        registry = load_natives(args.natives) if args.natives else None
        if registry is not None:
            registry.check(g)
        n_pes = args.pes or os.cpu_count() or 1
        n_tasks = args.tasks or n_pes
        cg = expand_instances(g, n_tasks, n_pes)
        for w in cg.warnings:
            _err(f"warning: {w}")
        placement = None
        if args.placement:
            placement = parse_placement(Path(args.placement).read_text(encoding="utf-8"), cg, n_pes)
        cfg = RunConfig(n_pes=n_pes, n_tasks=n_tasks, steal=not args.no_steal, placement=placement,
                        argv=list(args.args), trace=args.trace, seed=args.seed,
                        timeout=args.timeout)
        out = run_program(cg, registry, cfg)
    except Deadlock as exc:
        _err(str(exc))
        return EXIT_DEADLOCK
    except OSError as exc:
        _err(f"{exc.filename}: {exc.strerror}")
        return EXIT_ERROR
    except (SuperflowError, ValueError) as exc:
        _err(f"error: {exc}")
        return EXIT_ERROR
    for line in out.trace:
        print(line)
    print(out.result_line)
    for st in out.stats:
        print(st.line())
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    if args.workload not in WORKLOADS:
        _err(f"unknown workload {args.workload!r}; available:")
        for name in sorted(WORKLOADS):
            _err(f"  {name:<18} {WORKLOADS[name].describe}")
        return EXIT_ERROR
    params = {k: getattr(args, k) for k in ("options", "reps", "tasks", "items", "block",
                                             "cost_ms", "mean_ms") if getattr(args, k) is not None}
    if args.bench_seed is not None:
        params["seed"] = args.bench_seed
    try:
        pes = [int(x) for x in args.pes.split(",")]
        report = run_bench(args.workload, pes, args.runs, not args.no_steal, **params)
    except (KeyError, ValueError, RuntimeError, SuperflowError) as exc:
        _err(f"error: {exc.args[0] if exc.args else exc}")
        return EXIT_ERROR
    print(report.csv() if args.csv else report.table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="superflow", description="Coarse-grained dataflow toolchain.")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="compile a .tc program to .fl (and optionally .dot)")
    b.add_argument("source")
    b.add_argument("--dot", action="store_true", help="also write <name>.dot")
    b.add_argument("--skeleton", action="store_true", help="also write <name>.skel super stubs")
    b.add_argument("-o", "--out-dir", help="output directory (default: next to the source)")
    b.add_argument("--tasks", type=int, help="instance count shown on parallel supers in .dot")
    b.set_defaults(func=cmd_build)

    r = sub.add_parser("run", help="run a .fl program on the virtual machine")
    r.add_argument("program")
    r.add_argument("-p", "--pes", type=int, help="processing elements (default: CPU count)")
    r.add_argument("-t", "--tasks", type=int, help="parallel instances (default: n_pes)")
    r.add_argument("--no-steal", action="store_true")
    r.add_argument("--placement", help="file of 'node_id pe_id' lines")
    r.add_argument("--trace", action="store_true", help="print FIRE and STEAL lines")
    r.add_argument("--seed", type=int, default=0, help="seed for victim selection")
    r.add_argument("--natives", help="module whose register(registry) adds native supers")
    r.add_argument("--timeout", type=float, help="abort after this many seconds")
    r.add_argument("--no-validate", action="store_true",
                   help="skip graph validation when loading (for debugging hand-written graphs)")
    r.add_argument("--args", nargs=argparse.REMAINDER, default=[],
                   help="remaining arguments are passed to treb_argv")
    r.set_defaults(func=cmd_run)

    k = sub.add_parser("bench", help="time a benchmark workload across PE counts")
    k.add_argument("workload")
    k.add_argument("--pes", default="1,2,4", help="comma-separated PE counts")
    k.add_argument("--runs", type=int, default=5, help="runs per point (median is reported)")
    k.add_argument("--csv", action="store_true")
    k.add_argument("--no-steal", action="store_true")
    k.add_argument("--options", type=int, help="blackscholes_lite: option count")
    k.add_argument("--reps", type=int, help="blackscholes_lite: pricing repetitions")
    k.add_argument("--tasks", type=int, help="blackscholes_lite: task count (default 8)")
    k.add_argument("--items", type=int, help="pipeline_lite: item count")
    k.add_argument("--block", type=int, help="pipeline_lite: items per task")
    k.add_argument("--cost-ms", dest="cost_ms", type=float, help="pipeline_lite: ms per item")
    k.add_argument("--mean-ms", dest="mean_ms", type=float, help="imbalance: mean task ms")
    k.add_argument("--bench-seed", dest="bench_seed", type=int, help="imbalance: duration seed")
    k.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
