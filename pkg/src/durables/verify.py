"""Trace verification: history checking, detect auditing, invariant monitors.

The harness produces a flat trace of invocations, responses, crashes,
recoveries, detect probes, and raw memory events.  Everything here is a
pure function of that trace:

* :func:`build_model` replays the trace once, reconstructing per-operation
  records (intervals use trace indices, so real-time order is exact) and
  deriving *install* and *move* events from anchor/face cell transitions --
  derived rather than self-reported, so a frame that crashed mid-operation
  cannot under-report what it did to memory.
* :func:`check_durable` decides durable linearizability: every operation
  that completed crash-free takes effect within its interval with its
  observed response; a crashed operation either never takes effect or takes
  effect between its invocation and the end of its recovery.  The search is
  an exhaustive interval-respecting enumeration with memoisation -- sound
  and complete for the history sizes explored here -- and any accepting
  order is replayed once more against the specification machine before the
  verdict is returned.
* :func:`audit_detect` checks the detectability contract: the handle's
  watermark strictly increased across an operation iff that operation
  installed (and then the probed response identifies it), and every crashed
  operation whose watermark did not move was re-issued.
* :func:`run_monitors` checks the structural invariants of the algorithms:
  install/move alternation, anchor-ahead-of-face sequencing, pinned install
  windows, watermark monotonicity, the staging-bit seesaw, bit-preserving
  imprints, value-changing moves, trivial operations leaving no footprint,
  per-operation shared-event bounds.

Contexts are compared up to order-preserving renaming: the specification
machine mints abstract tokens and the checker maintains a partial, strictly
monotone binding from tokens to implementation sequence numbers, extended
as responses are matched and never by numeric equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .specmodels import ACK
from .world import NIL_HANDLE

# Declared shared-memory events per operation (client cost; the per-process
# pending-operation record is maintained by the harness and excluded).
BOUNDS = {
    "durec": {"ecll": 1, "ecvl": 1, "ecsc": 11, "detect": 1, "recover": 6},
    "durecw": {"ecll": 1, "ecvl": 1, "ecsc": 25, "write": 39, "detect": 1, "recover": 50},
    "durall": {"ll": 2, "vl": 2, "sc": 27, "write": 40, "detect": 1, "recover": 53},
    "duracas": {"read": 1, "cas": 40, "write": 40, "detect": 2, "recover": 50},
}

#: Operations checked against the sequential specification (others, like
#: ``join`` and scripted ``detect``, are harness-level).
_SPEC_OPS = {
    "ecll", "ecvl", "ecsc", "write", "ll", "vl", "sc", "read", "cas",
}


@dataclass
class OpView:
    proc: int
    opid: int
    op: str
    obj: int
    args: tuple
    handle: int                 # watermark handle this op's detect consults
    invoke: int = -1            # trace index of invocation
    end: int = -1               # trace index of response / final recover_done
    response: object = None
    crashed: bool = False
    reissue_of: object = None
    d1: int = -1
    d2: int = -1
    r2: object = None
    must_effect: bool = False
    required_response: object = None
    saw_install: bool = False
    events: int = 0
    trivial: bool = False


@dataclass
class RecoverView:
    proc: int
    opid: int
    begin: int
    events: int = 0


@dataclass
class Violation:
    check: str
    detail: str

    def __str__(self):
        return f"[{self.check}] {self.detail}"


@dataclass
class TraceModel:
    ops: list = field(default_factory=list)
    recovers: list = field(default_factory=list)
    violations: list = field(default_factory=list)  # structural monitor findings
    inits: dict = field(default_factory=dict)       # top-level oid -> initial value
    second_fail_count: int = 0
    writes_ops: tuple = ("write",)


def _unpack(word):
    return word >> 1, word & 1


def build_model(trace, algo: str) -> TraceModel:
    """Single replay of a trace: operation records + derived memory facts."""
    m = TraceModel()
    bad = m.violations.append

    # Registered layout.
    ec_handle = {}      # hid -> (val_cell, detval_cell)
    ec_obj = {}         # oid -> (x_cell, y_cell, init word)
    x_of, y_of = {}, {} # cell -> ec oid
    val_of, det_of = {}, {}  # cell -> hid
    op_cells = set()
    cw_obj = {}         # oid -> (w_oid, z_oid)
    crit_hids, casual_hids = set(), set()
    ll_obj = {}         # oid -> inner cw oid

    shadow = {}         # registered cell -> content
    pending_install = {}   # ec oid -> (hid, seq, val)
    pinned_handle = {}     # hid -> ec oid while its install is unpublished
    installed_seqs = {}    # hid -> set of installed seqs
    installs = []          # (idx, proc, ec oid, hid, seq, packed val)

    # Composite seesaw state, per cw object id.
    cw_state = {}       # oid -> dict(wval, wbit, zval, zbit, imprint_since, z_at_install)

    cur_op = {}         # proc -> OpView of in-flight client op
    cur_rec = {}        # proc -> RecoverView
    pre_d = {}          # (proc, opid) -> d1

    def cw_oid_of_inner(ec_oid):
        for cid, (w, z) in cw_obj.items():
            if ec_oid in (w, z):
                return cid, ("w" if ec_oid == w else "z")
        return None, None

    for idx, e in enumerate(trace):
        kind = e[0]
        if kind == "mem":
            _, step, proc, mkind, cell, args, res = e
            frame = cur_rec.get(proc) or cur_op.get(proc)
            if frame is not None:
                frame.events += 1
            if cell not in shadow:
                continue
            old = shadow[cell]
            if mkind == "r":
                if res != old:
                    bad(Violation("shadow", f"stale read of cell {cell}: {res} != {old}"))
                continue
            new = args if mkind == "w" else (args[1] if res else old)
            if new == old:
                shadow[cell] = new
                continue
            if cell in x_of:
                oid = x_of[cell]
                if mkind != "c":
                    bad(Violation("anchor", f"plain write to anchor of {oid}"))
                hid, seq = new
                if seq <= old[1]:
                    bad(Violation("anchor", f"anchor seq not increasing on {oid}: {old} -> {new}"))
                if oid in pending_install:
                    bad(Violation("alternation", f"install on {oid} while one is unpublished"))
                vcell = ec_handle.get(hid, (None, None))[0]
                pval = shadow.get(vcell, (0, 0))[0]
                pending_install[oid] = (hid, seq, pval)
                pinned_handle[hid] = oid
                installed_seqs.setdefault(hid, set()).add(seq)
                installs.append((idx, proc, oid, hid, seq, pval))
                op = cur_op.get(proc)
                if op is not None and op.handle == hid:
                    op.saw_install = True
                # Anchor ahead of face.
                ycell = ec_obj[oid][1]
                if seq < shadow[ycell][0]:
                    bad(Violation("anchor", f"anchor behind face on {oid}"))
                # Composite classification.
                cid, side = cw_oid_of_inner(oid)
                if cid is not None:
                    st = cw_state[cid]
                    v, b = _unpack(pval)
                    if side == "w":
                        if st["wbit"] != st["zbit"]:
                            bad(Violation("seesaw", f"stage install on {cid} while a write is in flight"))
                        if b != 1 - st["zbit"]:
                            bad(Violation("seesaw", f"stage install on {cid} does not flip the bit"))
                        st.update(wval=v, wbit=b, imprint_since=False, z_at_install=st["zval"])
                    elif hid in casual_hids:
                        # Transfer move: carries the staged value, flips Z's bit.
                        if st["wbit"] == st["zbit"]:
                            bad(Violation("seesaw", f"transfer on {cid} with nothing staged"))
                        if (v, b) != (st["wval"], st["wbit"]):
                            bad(Violation("seesaw", f"transfer on {cid} carries {v, b}, staged {st['wval'], st['wbit']}"))
                        if algo == "duracas" and v == st["zval"] and not st["imprint_since"]:
                            bad(Violation("norepeat", f"transfer republishes value {v} on {cid}"))
                        st.update(zval=v, zbit=b)
                    else:
                        # Imprint: client ecsc/cas, preserves Z's bit.
                        if b != st["zbit"]:
                            bad(Violation("imprint", f"imprint on {cid} flips the bit"))
                        st.update(zval=v, imprint_since=True)
            elif cell in y_of:
                oid = y_of[cell]
                if mkind != "c":
                    bad(Violation("face", f"plain write to face of {oid}"))
                seq, val = new
                if seq <= old[0]:
                    bad(Violation("face", f"face seq not increasing on {oid}"))
                pi = pending_install.pop(oid, None)
                if pi is None:
                    bad(Violation("alternation", f"move on {oid} without an unpublished install"))
                else:
                    hid, iseq, ival = pi
                    pinned_handle.pop(hid, None)
                    if (seq, val) != (iseq, ival):
                        bad(Violation("move", f"move on {oid} published {(seq, val)}, installed {(iseq, ival)}"))
            elif cell in det_of:
                hid = det_of[cell]
                if mkind != "c":
                    bad(Violation("watermark", f"plain write to watermark of handle {hid}"))
                if new[0] <= old[0]:
                    bad(Violation("watermark", f"watermark of {hid} not increasing"))
                if new[0] not in installed_seqs.get(hid, ()):
                    bad(Violation("watermark", f"watermark of {hid} raised to non-installed {new[0]}"))
            elif cell in val_of:
                hid = val_of[cell]
                if hid in pinned_handle:
                    bad(Violation("pinned", f"handle {hid} value overwritten during its install window"))
            shadow[cell] = new

        elif kind == "invoke":
            _, step, proc, (opid, op, oid, args, hid, reissue_of) = e
            ov = OpView(proc, opid, op, oid, tuple(args), hid, invoke=idx,
                        reissue_of=reissue_of)
            ov.d1 = pre_d.pop((proc, opid), -1)
            m.ops.append(ov)
            if op != "join":
                cur_op[proc] = ov
        elif kind == "response":
            _, step, proc, (opid, result) = e
            op = cur_op.get(proc)
            if op is not None and op.opid == opid:
                op.response = result
                op.end = idx
                del cur_op[proc]
        elif kind == "probe":
            _, step, proc, (phase, opid, d, r) = e
            if phase == "pre":
                pre_d[(proc, opid)] = d
            else:
                for op in reversed(m.ops):
                    if op.proc == proc and op.opid == opid:
                        op.d2, op.r2 = d, r
                        break
        elif kind == "crash":
            proc = e[2]
            cur_rec.pop(proc, None)
            op = cur_op.get(proc)
            if op is not None:
                op.crashed = True
        elif kind == "recover_begin":
            _, step, proc, (opid,) = e
            rv = RecoverView(proc, opid, idx)
            cur_rec[proc] = rv
            m.recovers.append(rv)
        elif kind == "recover_done":
            _, step, proc, (opid,) = e
            cur_rec.pop(proc, None)
            op = cur_op.get(proc)
            if op is not None and op.opid == opid:
                op.end = idx
                del cur_op[proc]
        elif kind == "emit":
            _, step, proc, payload = e
            tag = payload[0]
            op = cur_op.get(proc)
            if tag == "cas_second_fail":
                m.second_fail_count += 1
            elif tag in ("trivial_cas", "trivial_write") and op is not None:
                op.trivial = True

        elif kind == "reg_ec_handle":
            hid, vcell, dcell = e[3]
            ec_handle[hid] = (vcell, dcell)
            val_of[vcell], det_of[dcell] = hid, hid
            shadow[vcell] = (0, 0)
            shadow[dcell] = (0, 0)
        elif kind == "reg_ec_object":
            oid, xcell, ycell, init = e[3]
            ec_obj[oid] = (xcell, ycell, init)
            x_of[xcell], y_of[ycell] = oid, oid
            shadow[xcell] = (NIL_HANDLE, 0)
            shadow[ycell] = (0, init)
            m.inits[oid] = init
        elif kind == "reg_cw_handle":
            hid, crit, casual, op_cell = e[3]
            crit_hids.add(crit)
            casual_hids.add(casual)
            if op_cell >= 0:
                op_cells.add(op_cell)
                shadow[op_cell] = (0, 0)
        elif kind == "reg_cw_object":
            oid, w_oid, z_oid = e[3]
            cw_obj[oid] = (w_oid, z_oid)
            init = _unpack(ec_obj[z_oid][2])[0]
            m.inits[oid] = init
            cw_state[oid] = dict(wval=init, wbit=0, zval=init, zbit=0,
                                 imprint_since=False, z_at_install=init)
        elif kind == "reg_ll_handle":
            pass
        elif kind == "reg_ll_object":
            oid, inner = e[3]
            m.inits[oid] = m.inits[inner]

    # Finalize crashed-op bookkeeping.
    writes = ("write",)
    for op in m.ops:
        if op.crashed:
            if op.d2 > op.d1:
                op.must_effect = True
                op.required_response = ACK if op.op in writes else True
    return m


# ---------------------------------------------------------------------------
# Sequential replay with context renaming.


_SKIP = object()


def _ec_branches(state, op_name, args, writable):
    """All spec-consistent outcomes of an EC op; responses use impl seqs.

    ``state`` is ``(tok, val, binds, forbids)``: ``tok`` counts successful
    mutations (the abstract context), ``binds`` is the monotone partial map
    token -> implementation seq (sorted tuple of pairs), ``forbids`` the
    bindings ruled out by on-the-record failures.
    """
    tok, val, binds, forbids = state
    bound = None
    for t, s in binds:
        if t == tok:
            bound = s
    last_seq = binds[-1][1] if binds else -1

    def can_bind(s):
        return s > last_seq and (tok, s) not in forbids

    if op_name == "ecll":
        # Response must be produced by the caller: handled by the filter,
        # which may bind the current token to the observed seq.
        return [("ecll", bound, can_bind, state)]
    if op_name == "ecvl":
        s = args[0]
        if bound is not None:
            return [(state, bound == s)]
        out = [((tok, val, binds, forbids | {(tok, s)}), False)]
        if can_bind(s):
            out.append(((tok, val, binds + ((tok, s),), forbids), True))
        return out
    if op_name == "ecsc":
        s, v = args
        if bound is not None:
            if bound == s:
                return [((tok + 1, v, binds, forbids), True)]
            return [(state, False)]
        out = [((tok, val, binds, forbids | {(tok, s)}), False)]
        if can_bind(s):
            out.append(((tok + 1, v, binds + ((tok, s),), forbids), True))
        return out
    if op_name == "write" and writable:
        return [((tok + 1, args[0], binds, forbids), ACK)]
    raise ValueError(f"unsupported op {op_name!r} for EC oracle")


def _branches(oracle, state, op):
    """(state', response) alternatives for applying *op*, pre-filter."""
    name, args = op.op, op.args
    if oracle == "wcas":
        if name == "read":
            return [(state, state)]
        if name == "write":
            return [(args[0], ACK)]
        if name == "cas":
            old, new = args
            return [((new, True) if state == old else (state, False))]
        raise ValueError(f"unsupported op {name!r} for w-cas oracle")
    if oracle == "llsc":
        ver, val, links = state
        linked = dict(links).get(op.proc)
        if name == "ll":
            return [((ver, val, tuple(sorted({**dict(links), op.proc: ver}.items()))), val)]
        if name == "vl":
            return [(state, linked == ver)]
        if name == "sc":
            dropped = tuple(p for p in links if p[0] != op.proc)
            if linked != ver:
                return [((ver, val, dropped), False)]
            return [((ver + 1, args[0], dropped), True)]
        if name == "write":
            return [((ver + 1, args[0], links), ACK)]
        raise ValueError(f"unsupported op {name!r} for ll/sc oracle")
    return _ec_branches(state, name, args, writable=(oracle == "ecw"))


def _filtered_branches(oracle, state, op):
    """Branches compatible with what was observed (or required) of *op*."""
    want = None
    if not op.crashed:
        want = ("exact", op.response)
    elif op.must_effect and op.required_response is not None:
        want = ("exact", op.required_response)

    out = []
    for br in _branches(oracle, state, op):
        if br[0] == "ecll":
            # Deferred: response is (seq, val); seq must agree with (or
            # extend) the token binding, val with the current value.
            _, bound, can_bind, st = br
            tok, val, binds, forbids = st
            if want is None:
                # Effect with unknown response constrains nothing.
                out.append((st, None))
                continue
            s_obs, v_obs = want[1]
            if v_obs != val:
                continue
            if bound is not None:
                if bound == s_obs:
                    out.append((st, want[1]))
            elif can_bind(s_obs):
                out.append(((tok, val, binds + ((tok, s_obs),), forbids), want[1]))
            continue
        st, resp = br
        if want is None or resp == want[1]:
            out.append((st, resp))
    return out


def _oracle_init(oracle, init):
    if oracle == "wcas":
        return init
    if oracle == "llsc":
        return (0, init, ())
    return (0, init, ((0, 0),), frozenset())  # fresh object: token 0 is seq 0


@dataclass
class Verdict:
    ok: bool
    reason: str = ""
    witness: dict = field(default_factory=dict)  # oid -> [(OpView, response|_SKIP)]


def check_durable(ops, oracle: str, inits: dict) -> Verdict:
    """Durable-linearizability decision over per-object subhistories."""
    verdict = Verdict(True)
    for oid in sorted({o.obj for o in ops}):
        sub = [o for o in ops if o.obj == oid and o.op in _SPEC_OPS]
        got = _check_object(sub, oracle, inits[oid])
        if got is None:
            return Verdict(False, reason=f"object {oid}: no valid effect order")
        _validate_witness(got, oracle, inits[oid])
        verdict.witness[oid] = got
    return verdict


def _check_object(ops, oracle, init):
    n = len(ops)
    full = (1 << n) - 1
    state0 = _oracle_init(oracle, init)
    seen = set()
    order = []

    def dfs(mask, state, now):
        if mask == 0:
            return True
        key = (mask, state, now)
        if key in seen:
            return False
        for i in range(n):
            bit = 1 << i
            if not mask & bit:
                continue
            o = ops[i]
            t = now if now > o.invoke else o.invoke
            if t <= o.end:
                for st2, resp in _filtered_branches(oracle, state, o):
                    order.append((o, resp))
                    if dfs(mask & ~bit, st2, t):
                        return True
                    order.pop()
            if o.crashed and not o.must_effect:
                order.append((o, _SKIP))
                if dfs(mask & ~bit, state, now):
                    return True
                order.pop()
        seen.add(key)
        return False

    return list(order) if dfs(full, state0, -1) else None


def _validate_witness(order, oracle, init):
    """Machine-check an accepting order by straight sequential replay."""
    state = _oracle_init(oracle, init)
    now = -1
    for o, resp in order:
        if resp is _SKIP:
            if not o.crashed or o.must_effect:
                raise AssertionError("witness skips a non-skippable op")
            continue
        t = max(now, o.invoke)
        if t > o.end:
            raise AssertionError("witness violates real-time order")
        now = t
        matches = [st for st, r in _filtered_branches(oracle, state, o) if r == resp]
        if not matches:
            raise AssertionError(f"witness response mismatch on {o}")
        state = matches[0]


# ---------------------------------------------------------------------------
# Detectability audit.


def audit_detect(model: TraceModel, algo: str):
    violations = []
    ops = [o for o in model.ops if o.op in _SPEC_OPS]
    by_id = {(o.proc, o.opid): o for o in ops}
    for o in ops:
        if o.d2 < o.d1:
            violations.append(Violation("detect", f"watermark decreased across {o.op} of proc {o.proc}"))
        increased = o.d2 > o.d1
        if increased != o.saw_install:
            violations.append(Violation(
                "detect",
                f"proc {o.proc} op {o.opid} ({o.op}): watermark moved={increased} "
                f"but installed={o.saw_install}"))
        if o.crashed and not increased:
            reissued = any(p.proc == o.proc and p.reissue_of == o.opid for p in model.ops)
            if not reissued:
                violations.append(Violation(
                    "detect", f"crashed op {o.opid} of proc {o.proc} not re-issued"))
        if increased and algo == "duracas":
            expect = ACK if o.op == "write" else True
            if o.r2 != expect:
                violations.append(Violation(
                    "detect", f"probe response {o.r2!r} for visible {o.op}, expected {expect!r}"))
    return violations


# ---------------------------------------------------------------------------
# Invariant monitors.


def run_monitors(model: TraceModel, algo: str):
    violations = list(model.violations)
    bounds = BOUNDS[algo]
    for o in model.ops:
        if o.op in ("join",):
            continue
        limit = bounds.get(o.op)
        if limit is not None and o.events > limit:
            violations.append(Violation(
                "bound", f"{o.op} used {o.events} shared events (bound {limit})"))
        if o.trivial and o.saw_install:
            violations.append(Violation(
                "trivial", f"trivial {o.op} of proc {o.proc} mutated the object"))
    for rv in model.recovers:
        if rv.events > bounds["recover"]:
            violations.append(Violation(
                "bound", f"recover used {rv.events} shared events (bound {bounds['recover']})"))
    if model.second_fail_count:
        violations.append(Violation(
            "cas-retry", f"second-round imprint failed {model.second_fail_count} times"))
    return violations


def history_key(ops, inits):
    """Canonical form of the abstract history the linearizability verdict
    depends on: operations with their outcomes and obligations, plus the
    precedence relation induced by non-overlapping intervals.  Interleavings
    that differ only in how overlapping steps mesh share a key."""
    idx = sorted(range(len(ops)), key=lambda i: (ops[i].invoke, ops[i].end))
    rows = tuple(
        (ops[i].obj, ops[i].proc, ops[i].op, ops[i].args,
         None if ops[i].crashed else ops[i].response,
         ops[i].crashed, ops[i].must_effect, ops[i].required_response)
        for i in idx)
    prec = tuple(
        (a, b)
        for a, i in enumerate(idx) for b, j in enumerate(idx)
        if ops[i].end < ops[j].invoke)
    return (rows, prec, tuple(sorted(inits.items())))


def verify_run(trace, algo: str, cache: dict = None):
    """Full verdict for one terminal trace: checker + audit + monitors.

    ``cache`` memoises the linearizability verdict across runs whose
    abstract histories coincide (monitors and the detect audit are cheap
    and always re-run)."""
    oracle = {"durec": "ec", "durecw": "ecw", "durall": "llsc", "duracas": "wcas"}[algo]
    model = build_model(trace, algo)
    problems = run_monitors(model, algo)
    problems += audit_detect(model, algo)
    ops = [o for o in model.ops if o.op in _SPEC_OPS]
    if cache is not None:
        key = history_key(ops, model.inits)
        ok_reason = cache.get(key)
        if ok_reason is None:
            verdict = check_durable(ops, oracle, model.inits)
            ok_reason = (verdict.ok, verdict.reason)
            cache[key] = ok_reason
        if not ok_reason[0]:
            problems.append(Violation("linearizability", ok_reason[1]))
        return model, problems
    verdict = check_durable(ops, oracle, model.inits)
    if not verdict.ok:
        problems.append(Violation("linearizability", verdict.reason))
    return model, problems
