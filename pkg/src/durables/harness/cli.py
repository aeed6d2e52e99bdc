"""Command-line front end for the harness.

Subcommands::

    durables explore  --algo duracas --script "cas:0,5|write:7" --crashes 1
    durables stress   --executors 8 --ops 20000 --crash-rate 0.01
    durables check    --algo durec trace.jsonl
    durables bench

Scripts are given per process, processes separated by ``|``, operations by
``;``.  Each operation is ``name[#object]:arg,arg``; arguments are integers
or back-references into the same process's earlier results: ``@K.seq`` /
``@K.val`` (components of the K-th operation's load-link response) and
``@K.res`` (the raw response).
"""

from __future__ import annotations

import argparse
import random
import sys

from ..verify import verify_run
from .explore import explore, explore_random
from .machine import ALGOS, ExploreConfig, ScriptOp
from .trace import read_trace, write_trace


def parse_script(text: str):
    """Parse the mini-DSL described in the module docstring."""
    scripts = []
    for proc_part in text.split("|"):
        ops = []
        for op_part in filter(None, (s.strip() for s in proc_part.split(";"))):
            head, _, argtext = op_part.partition(":")
            name, _, objtext = head.partition("#")
            args = []
            for tok in filter(None, (a.strip() for a in argtext.split(","))):
                if tok.startswith("@"):
                    ref, _, fieldname = tok[1:].partition(".")
                    if fieldname not in ("seq", "val", "res"):
                        raise ValueError(f"unknown reference field {tok!r}")
                    args.append((fieldname, int(ref)))
                else:
                    args.append(int(tok))
            ops.append(ScriptOp(name.strip(), tuple(args), int(objtext or 0)))
        scripts.append(ops)
    return scripts


def _config(args) -> ExploreConfig:
    scripts = parse_script(args.script)
    for script in scripts:
        for sop in script:
            if sop.op not in ALGOS[args.algo]["ops"] and sop.op != "join":
                raise SystemExit(f"{args.algo} has no operation {sop.op!r}")
    return ExploreConfig(
        algo=args.algo,
        scripts=scripts,
        inits=tuple(args.init),
        crashes=args.crashes,
        granularity=args.granularity,
    )


def cmd_explore(args):
    cfg = _config(args)
    if args.runs:
        report = explore_random(cfg, runs=args.runs, seed=args.seed)
        mode = f"random ({args.runs} runs, seed {args.seed})"
    else:
        report = explore(cfg)
        mode = "exhaustive"
    print(f"{mode}: {report.schedules} schedules, {report.pruned} pruned, "
          f"{report.steps} steps")
    for name, n in sorted(report.max_events.items()):
        print(f"  max shared events {name}: {n}")
    for f in report.failures:
        print(f"FAIL choices={f.choices}")
        for p in f.problems:
            print(f"  {p}")
        if args.trace_out:
            write_trace(args.trace_out, f.trace)
            print(f"  trace written to {args.trace_out}")
    return 1 if report.failures else 0


def cmd_stress(args):
    from .stress import stress

    report = stress(executors=args.executors, ops=args.ops,
                    increments=args.increments, crash_rate=args.crash_rate,
                    seed=args.seed)
    print(f"counter {report.counter} (expected {report.expected}), "
          f"{report.crashes} simulated crashes")
    for e in report.errors:
        print(f"ERROR {e}")
    print("ok" if report.ok else "FAILED")
    return 0 if report.ok else 1


def cmd_check(args):
    trace = read_trace(args.trace)
    model, problems = verify_run(trace, args.algo)
    for p in problems:
        print(p)
    print("ok" if not problems else f"{len(problems)} problem(s)")
    return 0 if not problems else 1


def cmd_bench(args):
    from .bench import run_all

    print(run_all().render())
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="durables", description="Verification harness for durable, "
        "detectable persistent-memory objects.")
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("explore", help="enumerate schedules and check each run")
    ex.add_argument("--algo", required=True, choices=sorted(ALGOS))
    ex.add_argument("--script", required=True)
    ex.add_argument("--init", type=int, action="append", default=None,
                    help="initial object value (repeatable, one object each)")
    ex.add_argument("--crashes", type=int, default=0)
    ex.add_argument("--granularity", choices=["fine", "block"], default="")
    ex.add_argument("--runs", type=int, default=0,
                    help="sample this many random schedules instead of all")
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--trace-out", default="")
    ex.set_defaults(fn=cmd_explore)

    st = sub.add_parser("stress", help="multi-threaded run on native memory")
    st.add_argument("--executors", type=int, default=8)
    st.add_argument("--ops", type=int, default=10_000)
    st.add_argument("--increments", type=int, default=2_000)
    st.add_argument("--crash-rate", type=float, default=0.01)
    st.add_argument("--seed", type=int, default=0)
    st.set_defaults(fn=cmd_stress)

    ck = sub.add_parser("check", help="re-check a recorded trace")
    ck.add_argument("--algo", required=True, choices=sorted(ALGOS))
    ck.add_argument("trace")
    ck.set_defaults(fn=cmd_check)

    be = sub.add_parser("bench", help="informational micro-benchmarks")
    be.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "init", 1) is None:
        args.init = [0]
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
