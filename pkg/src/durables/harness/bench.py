"""Informational micro-benchmarks.

Timings here are not correctness claims; they exist to spot gross
regressions (an accidental O(n^2) in the scheduler, a checker blow-up) and
to report rough throughput of the native backend.  Everything runs
single-trial with a monotonic clock; treat the numbers as order-of-magnitude.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .. import duracas, durec
from ..pmem import NativeMemory
from ..verify import verify_run
from ..world import World
from .explore import explore
from .machine import ExploreConfig, ScriptOp
from .stress import _drive


@dataclass
class BenchResult:
    name: str
    seconds: float
    detail: str = ""


@dataclass
class BenchReport:
    results: list = field(default_factory=list)

    def add(self, name, seconds, detail=""):
        self.results.append(BenchResult(name, seconds, detail))

    def render(self):
        return "\n".join(
            f"{r.name:<32} {r.seconds:>9.3f}s  {r.detail}" for r in self.results
        )


def bench_native_ops(n: int = 50_000) -> BenchResult:
    world = World(NativeMemory())
    o = duracas.new_object(world, 0)
    h = duracas.create_handle(world)
    t0 = time.monotonic()
    for i in range(n):
        _drive(world.mem, duracas.write(world, o, h, i & 0xFF))
        _drive(world.mem, duracas.read(world, o, h))
    dt = time.monotonic() - t0
    return BenchResult("native write+read pairs", dt, f"{2 * n / dt:,.0f} ops/s")


def bench_explore(procs: int = 2) -> BenchResult:
    scripts = [
        [ScriptOp("ecll", ()), ScriptOp("ecsc", (("seq", 0), 10 + p))]
        for p in range(procs)
    ]
    cfg = ExploreConfig("durec", scripts, inits=[0], crashes=0)
    t0 = time.monotonic()
    rep = explore(cfg)
    dt = time.monotonic() - t0
    return BenchResult(
        f"explore durec {procs}p ll+sc", dt,
        f"{rep.schedules} schedules, {rep.schedules / dt:,.0f}/s"
    )


def bench_checker(n: int = 200) -> BenchResult:
    scripts = [
        [ScriptOp("ecll", ()), ScriptOp("ecsc", (("seq", 0), 10 + p))]
        for p in range(2)
    ]
    cfg = ExploreConfig("durec", scripts, inits=[0], crashes=0)
    from .explore import explore_random

    t0 = time.monotonic()
    rep = explore_random(cfg, runs=n, seed=7)
    dt = time.monotonic() - t0
    return BenchResult("check random durec runs", dt, f"{n / dt:,.0f} runs/s")


def run_all() -> BenchReport:
    report = BenchReport()
    for fn in (bench_native_ops, bench_explore, bench_checker):
        r = fn()
        report.results.append(r)
    return report
