"""The verdict machinery: checker on hand-built histories, audits and
monitors on real and deliberately corrupted traces."""

import pytest

from durables.harness import ExploreConfig, ScriptOp
from durables.harness.machine import run_with_choices, run_random
from durables.specmodels import ACK
from durables.verify import (
    OpView,
    check_durable,
    history_key,
    verify_run,
)

import random


def op(i, name, args=(), *, obj=1, proc=0, invoke=0, end=100, response=None,
       crashed=False, must_effect=False, required_response=None):
    return OpView(proc=proc, opid=i, op=name, obj=obj, args=args, handle=proc,
                  invoke=invoke, end=end, response=response, crashed=crashed,
                  must_effect=must_effect, required_response=required_response)


# -- hand histories against the W-CAS oracle ---------------------------------


def test_sequential_history_accepts():
    ops = [
        op(0, "write", (5,), invoke=0, end=1, response=ACK),
        op(1, "read", (), invoke=2, end=3, response=5),
    ]
    assert check_durable(ops, "wcas", {1: 0}).ok


def test_real_time_order_is_enforced():
    # read returned the old value but started strictly after the write ended.
    ops = [
        op(0, "write", (5,), invoke=0, end=1, response=ACK),
        op(1, "read", (), invoke=2, end=3, response=0),
    ]
    assert not check_durable(ops, "wcas", {1: 0}).ok


def test_overlap_allows_either_order():
    ops = [
        op(0, "write", (5,), invoke=0, end=3, response=ACK),
        op(1, "read", (), invoke=1, end=2, response=0),
    ]
    assert check_durable(ops, "wcas", {1: 0}).ok


def test_crashed_op_may_skip_or_effect():
    crashed = op(0, "write", (5,), invoke=0, end=5, crashed=True)
    probe = op(1, "read", (), invoke=6, end=7, response=5)
    assert check_durable([crashed, probe], "wcas", {1: 0}).ok
    probe0 = op(1, "read", (), invoke=6, end=7, response=0)
    assert check_durable([crashed, probe0], "wcas", {1: 0}).ok


def test_crashed_op_with_obligation_must_effect():
    crashed = op(0, "write", (5,), invoke=0, end=5, crashed=True,
                 must_effect=True, required_response=ACK)
    probe = op(1, "read", (), invoke=6, end=7, response=0)
    assert not check_durable([crashed, probe], "wcas", {1: 0}).ok


def test_cas_response_must_match_state():
    ops = [
        op(0, "cas", (0, 4), invoke=0, end=1, response=True),
        op(1, "cas", (0, 6), invoke=2, end=3, response=True),
    ]
    assert not check_durable(ops, "wcas", {1: 0}).ok
    ops[1].response = False
    assert check_durable(ops, "wcas", {1: 0}).ok


# -- EC oracle: context renaming ----------------------------------------------


def test_ec_contexts_renamed_not_compared_numerically():
    # Implementation minted context 7 for the first install; the canonical
    # machine would mint 1.  The renaming must accept it.
    ops = [
        op(0, "ecll", (), invoke=0, end=1, response=(0, 0)),
        op(1, "ecsc", (0, 5), invoke=2, end=3, response=True),
        op(2, "ecll", (), invoke=4, end=5, response=(7, 5)),
        op(3, "ecsc", (7, 6), invoke=6, end=7, response=True),
    ]
    assert check_durable(ops, "ec", {1: 0}).ok


def test_ec_renaming_must_be_monotone():
    # Second-generation context numerically below the first is impossible.
    ops = [
        op(0, "ecsc", (0, 5), invoke=0, end=1, response=True),
        op(1, "ecll", (), invoke=2, end=3, response=(7, 5)),
        op(2, "ecsc", (7, 6), invoke=4, end=5, response=True),
        op(3, "ecll", (), invoke=6, end=7, response=(3, 6)),
    ]
    assert not check_durable(ops, "ec", {1: 0}).ok


def test_ec_failed_sc_on_current_context_rejected():
    # A failing SC whose context provably matches the current state.
    ops = [
        op(0, "ecll", (), invoke=0, end=1, response=(0, 0)),
        op(1, "ecsc", (0, 5), invoke=2, end=3, response=False),
        op(2, "ecvl", (0,), invoke=4, end=5, response=True),
    ]
    assert not check_durable(ops, "ec", {1: 0}).ok


# -- llsc oracle ---------------------------------------------------------------


def test_llsc_link_is_per_process():
    ops = [
        op(0, "ll", (), proc=0, invoke=0, end=1, response=0),
        op(1, "sc", (4,), proc=1, invoke=2, end=3, response=True),
    ]
    assert not check_durable(ops, "llsc", {1: 0}).ok
    ops[1].response = False
    assert check_durable(ops, "llsc", {1: 0}).ok


# -- verdicts on real traces ---------------------------------------------------


def _one_run(algo, scripts, seed=3, crashes=0):
    cfg = ExploreConfig(algo, scripts, inits=[0], crashes=crashes)
    while True:
        run = run_random(cfg, random.Random(seed))
        if not run.skipped:
            return run
        seed += 1


def test_clean_trace_verifies():
    run = _one_run("duracas", [[ScriptOp("cas", (0, 5)), ScriptOp("read", ())],
                               [ScriptOp("write", (7,))]])
    model, problems = verify_run(run.trace, "duracas")
    assert problems == []


def test_corrupted_response_caught():
    run = _one_run("duracas", [[ScriptOp("cas", (0, 5)), ScriptOp("read", ())],
                               [ScriptOp("write", (7,))]])
    t = list(run.trace)
    for i in range(len(t) - 1, -1, -1):
        if t[i][0] == "response" and isinstance(t[i][3][1], int):
            opid, val = t[i][3]
            t[i] = (t[i][0], t[i][1], t[i][2], (opid, val + 100))
            break
    _, problems = verify_run(t, "duracas")
    assert any(p.check == "linearizability" for p in problems)


def test_corrupted_watermark_caught():
    run = _one_run("durec", [[ScriptOp("ecll", ()), ScriptOp("ecsc", (("seq", 0), 5))]])
    t = list(run.trace)
    # Lower a probe's watermark after the install: audit must object.
    for i, e in enumerate(t):
        if e[0] == "probe" and e[3][2] > 0:
            phase, opid, d, r = e[3]
            t[i] = (e[0], e[1], e[2], (phase, opid, 0, r))
            break
    _, problems = verify_run(t, "durec")
    assert any(p.check == "detect" for p in problems)


def test_history_key_collapses_interleavings():
    # Interleavings that only differ in how overlapping steps mesh share a
    # history key; the key still separates different outcomes.
    from durables.verify import build_model, _SPEC_OPS

    cfg = ExploreConfig("duracas", [[ScriptOp("cas", (0, 5))], [ScriptOp("write", (7,))]],
                        inits=[0])
    keys, runs = set(), 0
    for seed in range(60):
        run = run_random(cfg, random.Random(seed))
        if run.skipped:
            continue
        runs += 1
        model = build_model(run.trace, "duracas")
        ops = [o for o in model.ops if o.op in _SPEC_OPS]
        keys.add(history_key(ops, model.inits))
    assert runs >= 30
    assert 1 < len(keys) < runs
