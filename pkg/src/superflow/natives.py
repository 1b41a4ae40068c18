"""Native super-instructions for the option-pricing benchmark.

Use from the command line with ``superflow run prog.fl --natives superflow.natives``.
Each native mirrors the interpreted body of the super with the same name
in the generated benchmark program, vectorized with numpy.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.special import erf

from .runtime.interp import ExecContext, write_line
from .runtime.registry import Registry

FIELDS = 6  # spot, strike, rate, volatility, time, is_put


def block_bounds(n_items: int, tid: int, n_tasks: int) -> tuple[int, int]:
    return n_items * tid // n_tasks, n_items * (tid + 1) // n_tasks


def _cnd(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / math.sqrt(2.0)))


def price_block(data: np.ndarray, reps: int) -> np.ndarray:
    """Black-Scholes prices for rows of ``data``; recomputed ``reps`` times."""
    s, k, r, v, t, put = (data[:, i] for i in range(FIELDS))
    prices = np.empty(len(data))
    for _ in range(max(1, reps)):
        sqrt_t = np.sqrt(t)
        d1 = (np.log(s / k) + (r + 0.5 * v * v) * t) / (v * sqrt_t)
        d2 = d1 - v * sqrt_t
        disc = k * np.exp(-r * t)
        call = s * _cnd(d1) - disc * _cnd(d2)
        prices = np.where(put > 0.5, call - s + disc, call)
    return prices


def bs_read(ctx: ExecContext) -> None:
    lo, hi = block_bounds(ctx.inputs["nopt"], ctx.tid, ctx.n_tasks)
    with open(ctx.inputs["path"], encoding="utf-8") as fh:
        lines = itertools.islice(fh, lo * FIELDS, hi * FIELDS)
        ctx.outputs["rd"] = [float(x) for x in lines]


def bs_compute(ctx: ExecContext) -> None:
    data = np.asarray(ctx.inputs["rd"], dtype=float).reshape(-1, FIELDS)
    ctx.outputs["price"] = price_block(data, ctx.inputs["reps"]).tolist()


def bs_write(ctx: ExecContext) -> None:
    prev = ctx.inputs.get("wr", 0) if ctx.tid > 0 else 0
    if ctx.inputs["price"]:
        write_line(ctx.inputs["outpath"], "\n".join(f"{p:.6f}" for p in ctx.inputs["price"]))
    ctx.outputs["wr"] = prev + len(ctx.inputs["price"])


def bs_close(ctx: ExecContext) -> None:
    # exact sum, so the total does not depend on how options were split into tasks
    ctx.outputs["total"] = math.fsum(itertools.chain.from_iterable(ctx.inputs["price"]))


def register(registry: Registry) -> Registry:
    registry.register("bs_read", bs_read, ["go", "rd", "path", "nopt"], ["rd"])
    registry.register("bs_compute", bs_compute, ["rd", "reps"], ["price"])
    registry.register("bs_write", bs_write, ["go", "wr", "price", "outpath"], ["wr"])
    registry.register("bs_close", bs_close, ["wr", "price"], ["total"])
    return registry
