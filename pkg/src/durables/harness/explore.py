"""Systematic and randomized schedule exploration.

Exhaustive mode enumerates scheduler decision branches by depth-first
replay: each run follows the recorded position stack and extends it with
first options; backtracking advances the deepest node that still has
unexplored candidates.  Every terminal (non-pruned) run is handed to the
verifier -- durable-linearizability check, detect audit, and invariant
monitors -- and the first failure is reported with the choice string that
reproduces it.

Two sound reductions keep the tree tractable:

* sleep sets over step signatures (process, possible-response flag, cells
  read, cells written): after a subtree for step ``t`` is done, sibling
  subtrees do not re-explore ``t`` until some step dependent on ``t`` runs.
  Steps of the same process, pairs of possible-response steps, and pairs
  with a write/read or write/write overlap on a cell are dependent;
  anything with an unknown footprint (operation starts, block-granularity
  steps) is dependent on everything, which disables the reduction rather
  than risking it.  Verdicts only consume per-cell event orders and the
  relative order of history events, both invariant under commuting
  independent steps, so every pruned run shares its verdict with an
  explored one.
* verdict memoisation: the linearizability search is cached on the
  abstract history (operations, responses, crash obligations, precedence),
  which thousands of distinct interleavings share.

Random mode drives the same machinery with a seeded RNG, useful for long
soak runs whose step counts far exceed what exhaustion can cover.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..verify import verify_run
from .machine import ExploreConfig, Run


@dataclass
class Failure:
    choices: list
    problems: list
    trace: list

    def __str__(self):
        probs = "; ".join(str(p) for p in self.problems)
        return f"choices={'.'.join(map(str, self.choices))}: {probs}"


@dataclass
class ExploreReport:
    schedules: int = 0
    pruned: int = 0
    steps: int = 0
    failures: list = field(default_factory=list)
    max_events: dict = field(default_factory=dict)   # op name -> max shared events

    @property
    def ok(self):
        return not self.failures


def _prefix_chooser(prefix):
    it = iter(prefix)

    def chooser(run, opts):
        if len(opts) == 1:
            return 0
        try:
            return next(it)
        except StopIteration:
            return 0

    return chooser


def _indep(a, b):
    """May two co-enabled steps with these signatures be reordered?"""
    if a is None or b is None:
        return False
    if a[1] == b[1]:                 # same process
        return False
    # Real-time constraints compare completions against invocations only:
    # two history events commute unless one is a possible completion and
    # the other a possible invocation.
    if (a[2][1] and b[2][0]) or (a[2][0] and b[2][1]):
        return False
    for c in a[4]:                   # a's writes vs b's reads and writes
        if c in b[3] or c in b[4]:
            return False
    for c in b[4]:                   # b's writes vs a's reads
        if c in a[3]:
            return False
    return True


class _Node:
    __slots__ = ("opts", "cands", "sigs", "pos", "explored", "profiles")

    def __init__(self, opts, cands, sigs):
        self.opts = opts         # the option tuples offered at this node
        self.cands = cands       # option indices enabled and not sleeping
        self.sigs = sigs         # signature per option (None = opaque)
        self.pos = 0             # index into cands currently being explored
        self.explored = []       # signatures of candidates already finished
        self.profiles = {}       # proc -> mutation profile of its step here


def _redundant_crash(node, cand):
    """Is this crash placement provably equivalent to an earlier one?

    The state at a node is a pure function of the decision prefix, so the
    mutation profile recorded when the same process's *step* ran from this
    node tells exactly which placements land after a persistent mutation;
    the rest would be pruned at runtime anyway (crashing after a
    non-mutating action drops the frame in an already-explored persistent
    state, and placements past the step's span fall out of the block)."""
    opt = node.opts[cand]
    if opt[0] != "crash":
        return False
    prof = node.profiles.get(opt[1])
    if prof is None:
        return False
    j = opt[2]
    return j > len(prof) or not prof[j - 1]


def _note_events(report, model):
    for o in model.ops:
        if o.op == "join":
            continue
        if o.events > report.max_events.get(o.op, -1):
            report.max_events[o.op] = o.events
    for rv in model.recovers:
        if rv.events > report.max_events.get("recover", -1):
            report.max_events["recover"] = rv.events


def explore(cfg: ExploreConfig, max_failures: int = 1, verify: bool = True,
            max_schedules: int = None) -> ExploreReport:
    report = ExploreReport()
    cache = {}
    path = []        # one _Node per multi-option decision along the prefix

    def chooser(run, opts):
        nonlocal depth, sleep
        if len(opts) == 1:
            sig = run.option_sig(opts[0])
            sleep = {s for s in sleep if _indep(s, sig)} if sleep else sleep
            return 0
        d = depth
        depth += 1
        if d < len(path):
            node = path[d]
        else:
            sigs = [run.option_sig(o) for o in opts]
            cands = [i for i in range(len(opts)) if sigs[i] not in sleep]
            if not cands:
                return None        # everything here is asleep: prune
            node = _Node(opts, cands, sigs)
            path.append(node)
        c = node.cands[node.pos]
        sig = node.sigs[c]
        base = sleep.union(node.explored) if node.explored else sleep
        sleep = {s for s in base if _indep(s, sig)}
        return c

    while True:
        depth, sleep = 0, set()
        run = Run(cfg, chooser).run()
        report.steps += run.step
        for node, (opt, prof) in zip(path, run.profiles):
            if prof is not None and opt[0] == "step":
                node.profiles[opt[1]] = prof
        if run.skipped:
            report.pruned += 1
        else:
            report.schedules += 1
            if verify:
                model, problems = verify_run(run.trace, cfg.algo, cache=cache)
                _note_events(report, model)
                if problems:
                    choices = [c for c, _ in run.decisions]
                    report.failures.append(Failure(choices, problems, run.trace))
                    if len(report.failures) >= max_failures:
                        return report
        if max_schedules is not None and report.schedules >= max_schedules:
            return report
        # Backtrack: advance the deepest node with an untried candidate.
        advanced = False
        while path and not advanced:
            node = path[-1]
            while node.pos + 1 < len(node.cands):
                done = node.sigs[node.cands[node.pos]]
                if done is not None:
                    node.explored.append(done)
                node.pos += 1
                if _redundant_crash(node, node.cands[node.pos]):
                    report.pruned += 1
                    continue
                advanced = True
                break
            if not advanced:
                path.pop()
        if not path:
            return report


def explore_random(cfg: ExploreConfig, runs: int, seed: int,
                   max_failures: int = 1, verify: bool = True,
                   min_steps: int = None) -> ExploreReport:
    report = ExploreReport()
    rng = random.Random(seed)
    cache = {}
    n = 0
    while True:
        run = Run(cfg, lambda r, opts: rng.randrange(len(opts))).run()
        report.steps += run.step
        n += 1
        if run.skipped:
            report.pruned += 1
        else:
            report.schedules += 1
            if verify:
                model, problems = verify_run(run.trace, cfg.algo, cache=cache)
                _note_events(report, model)
                if problems:
                    choices = [c for c, _ in run.decisions]
                    report.failures.append(Failure(choices, problems, run.trace))
                    if len(report.failures) >= max_failures:
                        return report
        if min_steps is not None:
            if report.steps >= min_steps:
                return report
        elif n >= runs:
            return report


def replay(cfg: ExploreConfig, choices):
    """Re-execute one schedule from a failure's choice string."""
    return Run(cfg, _prefix_chooser(list(choices))).run()
