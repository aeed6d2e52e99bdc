"""Verification harness: deterministic exploration, crash injection, stress.

:mod:`~durables.harness.machine` runs algorithm generators one persistent
memory action at a time under an explicit scheduler, :mod:`~durables.harness.explore`
enumerates every schedule (and crash placement) of a small script,
:mod:`~durables.harness.trace` serializes runs to a stable JSON-lines format,
and :mod:`~durables.harness.stress` drives the same generators from real
threads against the lock-based memory backend.
"""

from .explore import ExploreReport, Failure, explore, explore_random, replay
from .machine import ALGOS, ExploreConfig, Run, ScriptOp
from .stress import StressReport, stress
from .trace import decode_lines, encode_lines, read_trace, write_trace

__all__ = [
    "ALGOS",
    "ExploreConfig",
    "ExploreReport",
    "Failure",
    "Run",
    "ScriptOp",
    "StressReport",
    "decode_lines",
    "encode_lines",
    "explore",
    "explore_random",
    "read_trace",
    "replay",
    "stress",
    "write_trace",
]
