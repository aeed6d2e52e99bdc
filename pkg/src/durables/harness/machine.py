"""Deterministic step-machine execution of the durable algorithms.

Operations are generator functions yielding memory actions (see
:mod:`durables.world`).  The scheduler here delivers actions one *step* at
a time, so every interleaving is a sequence of choices -- which process
moves, and whether it crashes -- and a run is reproducible from its choice
string alone.

Granularity.  The base objects are explored at single-memory-access
granularity.  Algorithms composed *from* durable EC objects may instead be
explored with each nested EC operation taken as one atomic step (the
``("mark",)`` yields delimit them): the nested operations are linearizable
and independently model-checked at full granularity, so coarse steps
preserve all composite-level behaviours while keeping the interleaving
space tractable.  Crash injection stays at memory-access granularity in
both modes -- a crash choice carries the number of accesses to perform
before the frame is dropped -- because a torn sub-operation *is* observable
after a crash.

Crash/recovery protocol.  A crash erases the process's operation frame and
nothing else.  The next activation of that process restarts it: it reads
its pending-operation record, runs the algorithm's ``recover``, and then
probes ``detect``.  If the watermark moved, the crashed operation took
effect and its response is known; otherwise the harness re-issues it as a
fresh invocation.  Detect probes are free reads performed by the harness
immediately before an invocation and immediately after its completion (or
final recovery); they cost no scheduler step.

Code between two yields of an algorithm generator must only touch
process-local state or single-owner handle metadata whose mutation order
relative to a crash is immaterial; everything crash-sensitive must go
through a yielded action.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .. import durall, duracas, durec, durecw
from ..pmem import SimMemory
from ..specmodels import ACK
from ..world import World

# Process phases.
READY = "ready"          # has a next operation to invoke
RUNNING = "running"      # operation frame active
CRASHED = "crashed"      # frame lost; must restart + recover
RECOVERING = "recovering"
DONE = "done"


def _durec_ophash(h):
    return h.hid

ALGOS = {
    "durec": dict(
        mod=durec,
        ops={"ecll": durec.ecll, "ecvl": durec.ecvl, "ecsc": durec.ecsc, "detect": durec.detect},
        writes=(),  # ops acknowledged with ACK
        granularity="fine",
        oracle="ec",
        detect_hid=lambda h: h.hid,
        probe_cells=lambda h: (h.detval_cell,),
        # Every operation's code up to its first yield touches no memory,
        # so the first shared action is known before the generator starts.
        first_action=lambda o, h, op: ("read", h.detval_cell if op == "detect" else o.y_cell),
        recover_first=lambda o, h: ("read", o.x_cell),
    ),
    "durecw": dict(
        mod=durecw,
        ops={"ecll": durecw.ecll, "ecvl": durecw.ecvl, "ecsc": durecw.ecsc,
             "write": durecw.write, "detect": durecw.detect},
        writes=("write",),
        granularity="block",
        oracle="ecw",
        detect_hid=lambda h: h.critical.hid,
        probe_cells=lambda h: (h.critical.detval_cell,),
        start_foot=durecw.start_foot,
        recover_start_foot=durecw.recover_start_foot,
    ),
    "durall": dict(
        mod=durall,
        ops={"ll": durall.ll, "vl": durall.vl, "sc": durall.sc,
             "write": durall.write, "detect": durall.detect},
        writes=("write",),
        granularity="block",
        oracle="llsc",
        detect_hid=lambda h: h.inner.critical.hid,
        probe_cells=lambda h: (h.inner.critical.detval_cell,),
        start_foot=durall.start_foot,
        recover_start_foot=durall.recover_start_foot,
    ),
    "duracas": dict(
        mod=duracas,
        ops={"read": duracas.read, "cas": duracas.cas, "write": duracas.write,
             "detect": duracas.detect},
        writes=("write",),
        granularity="block",
        oracle="wcas",
        detect_hid=lambda h: h.critical.hid,
        probe_cells=lambda h: (h.critical.detval_cell, h.op_cell),
        start_foot=duracas.start_foot,
        recover_start_foot=duracas.recover_start_foot,
    ),
}

# Longest atomic block under coarse granularity: a nested ecsc (11 accesses)
# plus the couple of plain cell writes an outer algorithm may glue onto it.
MAX_CRASH_BATCH = 13


@dataclass
class ScriptOp:
    op: str
    args: tuple = ()
    obj: int = 0


@dataclass
class ExploreConfig:
    algo: str
    scripts: list = field(default_factory=list)   # per process: [ScriptOp, ...]
    inits: tuple = (0,)                           # one object per initial value
    crashes: object = 0                           # crash budget: int, or one per process
    granularity: str = ""                         # "" -> algorithm default
    max_crash_batch: int = MAX_CRASH_BATCH
    max_steps: int = 100_000                      # per-run step fuse

    def resolved_granularity(self) -> str:
        return self.granularity or ALGOS[self.algo]["granularity"]


class Proc:
    __slots__ = (
        "idx", "handle", "queue", "results", "phase", "gen", "awaiting",
        "started", "pending", "boundary_next", "block_foot", "crash_budget",
        "op_count", "cur_opid", "cur_script_idx", "crashed_op",
        "pending_record", "events_in_op",
    )

    def __init__(self, idx, script, crash_budget):
        self.idx = idx
        self.handle = None
        # Queue entries are (ScriptOp, script index, reissued-opid-or-None);
        # ScriptOps themselves are shared across replays and never mutated.
        self.queue = [(sop, k, None) for k, sop in enumerate(script)]
        self.results = {}                   # script index -> final response
        self.phase = READY if script else DONE
        self.gen = None
        self.awaiting = None
        self.started = False
        self.pending = None          # fetched-but-unexecuted memory action
        self.boundary_next = False   # pending action starts a new atomic block
        self.block_foot = None       # declared footprint of the pending block
        self.crash_budget = crash_budget
        self.op_count = 0
        self.cur_opid = None
        self.cur_script_idx = None
        self.crashed_op = None              # (opid, script_idx, ScriptOp, resolved args, d1)
        self.pending_record = None          # persistent: (oid, op name, resolved args)
        self.events_in_op = 0


class HarnessError(Exception):
    pass


def resolve_args(proc, raw_args):
    out = []
    for a in raw_args:
        if isinstance(a, tuple) and len(a) == 2 and a[0] in ("seq", "val", "res"):
            ref = proc.results.get(a[1])
            if ref is None:
                raise HarnessError(f"script references result {a[1]} which is unavailable")
            if a[0] == "seq":
                out.append(ref[0])
            elif a[0] == "val":
                out.append(ref[1])
            else:
                out.append(ref)
        else:
            out.append(a)
    return tuple(out)


class Run:
    """One deterministic execution of a configuration.

    ``chooser(n_options)`` picks the branch at every point with more than
    one option; the sequence of (choice, n_options) pairs is recorded in
    ``decisions`` and replaying it reproduces the run byte for byte.
    """

    def __init__(self, cfg: ExploreConfig, chooser):
        self.cfg = cfg
        self.algo = ALGOS[cfg.algo]
        self.chooser = chooser
        self.world = World(SimMemory())
        self.trace = []
        self.step = 0
        self.decisions = []
        self.skipped = False
        self.last_changed = True
        self.profiles = []    # per decision: (option, mutation profile|None)
        self._profile = None
        self.granularity = cfg.resolved_granularity()
        self.objects = []
        self._build()

    # -- construction -----------------------------------------------------

    def _log(self, entry):
        self.trace.append(entry)

    def _reg_handle(self, h):
        t = self.trace
        if isinstance(h, durec.DurEcHandle):
            t.append(("reg_ec_handle", 0, -1, (h.hid, h.val_cell, h.detval_cell)))
        elif isinstance(h, (durecw.DurEcwHandle, duracas.DuraCasHandle)):
            self._reg_handle(h.critical)
            self._reg_handle(h.casual)
            op_cell = getattr(h, "op_cell", -1)
            t.append(("reg_cw_handle", 0, -1, (h.hid, h.critical.hid, h.casual.hid, op_cell)))
        elif isinstance(h, durall.DuraLlHandle):
            self._reg_handle(h.inner)
            t.append(("reg_ll_handle", 0, -1, (h.hid, h.inner.hid)))

    def _reg_object(self, o):
        t = self.trace
        if isinstance(o, durec.DurEcObject):
            init = self.world.mem.peek(o.y_cell)
            t.append(("reg_ec_object", 0, -1, (o.oid, o.x_cell, o.y_cell, init[1])))
        elif isinstance(o, (durecw.DurEcwObject, duracas.DuraCasObject)):
            self._reg_object(o.w)
            self._reg_object(o.z)
            t.append(("reg_cw_object", 0, -1, (o.oid, o.w.oid, o.z.oid)))
        elif isinstance(o, durall.DuraLlObject):
            self._reg_object(o.inner)
            t.append(("reg_ll_object", 0, -1, (o.oid, o.inner.oid)))

    def _build(self):
        cfg = self.cfg
        mod = self.algo["mod"]
        for init in cfg.inits:
            o = mod.new_object(self.world, init)
            self.objects.append(o)
            self._reg_object(o)
        self.procs = []
        budgets = cfg.crashes
        if not isinstance(budgets, (list, tuple)):
            budgets = [budgets] * len(cfg.scripts)
        for i, script in enumerate(cfg.scripts):
            p = Proc(i, script, budgets[i])
            self.procs.append(p)
            if not (script and script[0].op == "join"):
                p.handle = mod.create_handle(self.world)
                self._reg_handle(p.handle)

    # -- option menu -------------------------------------------------------

    def options(self):
        opts = []
        fine = self.granularity == "fine"
        for p in self.procs:
            if p.phase in (READY, CRASHED):
                opts.append(("start", p.idx))
            elif p.phase in (RUNNING, RECOVERING):
                opts.append(("step", p.idx))
        if any(p.crash_budget > 0 for p in self.procs):
            maxj = 1 if fine else self.cfg.max_crash_batch
            for p in self.procs:
                if p.crash_budget <= 0:
                    continue
                if p.phase in (RUNNING, RECOVERING):
                    # Crashing right after a read drops the frame in the same
                    # persistent state as crashing before it, and the earlier
                    # placement is explored; offer only placements that can
                    # land after a memory mutation.
                    if fine and p.pending is not None and p.pending[0] == "read":
                        continue
                    opts.extend(("crash", p.idx, j) for j in range(1, maxj + 1))
                elif p.phase == READY and p.queue and p.queue[0][0].op not in ("join",):
                    opts.append(("crash0", p.idx))
        return opts

    def option_sig(self, opt):
        """Independence signature of an option, for partial-order reduction.

        ``None`` means "dependent on everything" (invocations, recovery
        entries -- anything whose memory footprint is not fully known
        before executing it).  Otherwise the signature is ``(kind,
        proc, (inv, end), read cells, written cells)``.  The middle flags
        classify the history events the option may emit: *inv* marks a
        possible operation invocation, *end* a possible completion (response
        or crash).  The checker's real-time constraints compare only
        end-before-invoke pairs, so two options commute unless one may emit
        an end and the other an invocation (or their cell footprints clash).
        """
        kind = opt[0]
        p = self.procs[opt[1]]
        if self.granularity != "fine":
            # Block granularity: a pending block's declared footprint (set
            # when its introducing mark was crossed) stands in for the exact
            # cells; invocations and recovery entries use the algorithm's
            # declared leading-step footprints.
            if kind == "crash0":
                # Invocation record plus crash marker; the only shared
                # access is the pre-operation watermark probe.
                if p.handle is None or not p.queue or p.queue[0][0].op == "join":
                    return None
                return ("crash0", p.idx, (True, True),
                        self.algo["probe_cells"](p.handle), ())
            if kind == "start":
                if p.handle is None:
                    return None
                if p.phase == CRASHED:
                    # Recovery entry: restart marker plus the first nested
                    # recovery block; further blocks always follow, so this
                    # step emits no checker-visible history event.
                    rfoot = self.algo.get("recover_start_foot")
                    if rfoot is None:
                        return None
                    foot = rfoot(self.world, p.crashed_op[2], p.handle)
                    if callable(foot):
                        foot = foot()
                    return ("rstart", p.idx, (False, False), foot[0], foot[1])
                if not p.queue or p.queue[0][0].op == "join":
                    return None
                sfoot = self.algo.get("start_foot")
                if sfoot is None:
                    return None
                sop = p.queue[0][0]
                end, r, w = sfoot(self.world, self.objects[sop.obj], p.handle, sop.op)
                # The pre-operation probe (and, if the step may complete the
                # operation, the post probe) reads the watermark cells.
                return ("start", p.idx, (True, end),
                        r + self.algo["probe_cells"](p.handle), w)
            if p.pending is None:
                return None
            foot = p.block_foot
            if foot is None:
                return None
            if callable(foot):
                foot = foot()
            r, w = foot
            if kind == "crash":
                return ("crash", p.idx, (False, True), r, w)
            # Any block may be its operation's last, delivering the response
            # and the post detect probe.
            return ("step", p.idx, (False, True),
                    r + self.algo["probe_cells"](p.handle), w)
        if kind in ("start", "crash0"):
            if p.handle is None or (p.phase != CRASHED and not p.queue):
                return None
            probes = self.algo["probe_cells"](p.handle)
            if p.phase == CRASHED:
                # Recovery entry: recover_begin plus the recovery routine's
                # first action; it may complete recovery in the same step,
                # probing the watermark and re-issuing the crashed call.
                rfirst = self.algo.get("recover_first")
                if rfirst is None:
                    return None
                tag, cell = rfirst(p.crashed_op[2], p.handle)
                rcells = probes + ((cell,) if tag == "read" else ())
                wcells = (cell,) if tag != "read" else ()
                return ("rstart", p.idx, (True, True), rcells, wcells)
            sop = p.queue[0][0]
            if sop.op == "join":
                return None
            if kind == "crash0":
                # Invocation record plus crash marker; the only shared
                # access is the pre-operation watermark probe.
                return ("crash0", p.idx, (True, True), probes, ())
            first = self.algo.get("first_action")
            if first is None:
                return None
            tag, cell = first(self.objects[sop.obj], p.handle, sop.op)
            rcells = probes + ((cell,) if tag == "read" else ())
            wcells = (cell,) if tag != "read" else ()
            return ("start", p.idx, (True, True), rcells, wcells)
        item = p.pending
        if item is None:
            return None
        tag = item[0]
        cell = item[1]
        fin = item[-1] == "fin"
        wcells = (cell,) if tag != "read" else ()
        rcells = (cell,) if tag == "read" else ()
        if kind == "crash":
            # The crash drops only the local frame, but it ends the pending
            # operation -- a completion event.
            return ("crash", p.idx, (False, True), rcells, wcells)
        if fin:
            # A possibly-final action carries the response and the post
            # detect probe, which reads the handle's watermark cell(s).
            rcells = rcells + self.algo["probe_cells"](p.handle)
            return ("step", p.idx, (False, True), rcells, wcells)
        return ("step", p.idx, (False, False), rcells, wcells)

    # -- delivery ----------------------------------------------------------

    def _exec(self, p, item):
        """Execute one memory action; set ``last_changed`` to whether it
        changed persistent state (used to prune redundant crash points)."""
        mem = self.world.mem
        tag = item[0]
        foot = p.block_foot
        if foot is not None:
            # Declared block footprints feed the partial-order reduction;
            # an action outside its declaration would make pruning unsound.
            if callable(foot):
                foot = foot()
            cell = item[1]
            if cell not in foot[1] and (tag != "read" or cell not in foot[0]):
                raise HarnessError(
                    f"action {item!r} outside declared block footprint {foot!r}")
        self.step += 1
        if tag == "read":
            res = mem.read(item[1])
            self.last_changed = False
            self._log(("mem", self.step, p.idx, "r", item[1], None, res))
        elif tag == "write":
            self.last_changed = mem.peek(item[1]) != item[2]
            mem.write(item[1], item[2])
            res = None
            self._log(("mem", self.step, p.idx, "w", item[1], item[2], None))
        elif tag == "cas":
            res = mem.cas(item[1], item[2], item[3])
            self.last_changed = bool(res) and item[2] != item[3]
            self._log(("mem", self.step, p.idx, "c", item[1], (item[2], item[3]), res))
        else:
            raise HarnessError(f"unknown action {item!r}")
        if self._profile is not None:
            self._profile.append(self.last_changed)
        p.events_in_op += 1
        return res

    def _fetch(self, p):
        """Resume *p* to its next memory action (or completion).

        Emits are logged against the step of the action that produced them;
        marks set ``boundary_next`` on the fetched action.  The code a
        generator runs between yields executes here, i.e. together with the
        *previous* action, which is why that code must be crash-insensitive.
        """
        crossed = False
        foot = None
        while True:
            try:
                if p.started:
                    item = p.gen.send(p.awaiting)
                else:
                    item = next(p.gen)
                    p.started = True
            except StopIteration as stop:
                return ("done", stop.value)
            p.awaiting = None
            tag = item[0]
            if tag == "emit":
                self._log(("emit", self.step, p.idx, item[1]))
                continue
            if tag == "mark":
                crossed = True
                if len(item) == 3:
                    foot = (item[1], item[2])
                elif len(item) == 2:
                    foot = item[1]     # callable, evaluated lazily
                else:
                    foot = None
                continue
            p.pending = item
            p.boundary_next = crossed
            if crossed:
                p.block_foot = foot
            return ("action", None)

    def deliver(self, p, crash_after=None):
        """Advance *p* by one scheduler step (or to a crash point).

        Returns ``("paused",)``, ``("done", value)`` or ``("crashpoint",)``;
        ``("redundant",)`` flags a crash placement beyond the operation's
        actual length, which prunes the run.  A response always lands on the
        same step as the operation's final memory action.
        """
        delivered = 0
        block = self.granularity == "block"
        while True:
            if crash_after is not None and delivered == crash_after:
                # Frame (and any unexecuted fetched action) is about to drop.
                # If the last executed action left persistent state untouched
                # the crash is indistinguishable from the earlier placement,
                # which is explored separately: prune this run.
                if not self.last_changed:
                    return ("skipcrash",)
                return ("crashpoint",)
            if self.step >= self.cfg.max_steps:
                raise HarnessError("step fuse blown; non-termination?")
            if p.pending is None:
                st = self._fetch(p)
                if st[0] == "done":
                    if crash_after is not None:
                        return ("redundant",)
                    return ("done", st[1])
                if delivered > 0 and (not block or p.boundary_next):
                    if crash_after is None:
                        return ("paused",)
                    if block:
                        # A crash placement reaching past a block boundary
                        # reproduces a schedule where the block completes as
                        # a step and the crash lands in the next one: prune.
                        return ("redundant",)
            item = p.pending
            p.pending = None
            p.awaiting = self._exec(p, item)
            delivered += 1

    # -- process lifecycle -------------------------------------------------

    def _probe(self, p, phase, opid):
        d, r = self.algo["mod"].peek_detect(self.world, p.handle)
        self._log(("probe", self.step, p.idx, (phase, opid, d, r)))
        return d

    def _invoke(self, p, crash_now=False):
        if p.phase == CRASHED:
            return self._begin_recover(p)
        sop, script_idx, reissue_of = p.queue.pop(0)
        if sop.op == "join":
            mod = self.algo["mod"]
            p.handle = mod.create_handle(self.world)
            self._reg_handle(p.handle)
            opid = p.op_count
            p.op_count += 1
            self._log(("invoke", self.step, p.idx, (opid, "join", -1, (), -1, None)))
            self._log(("response", self.step, p.idx, (opid, ACK)))
            p.results[script_idx] = ACK
            if not p.queue:
                p.phase = DONE
            return
        if p.handle is None:
            raise HarnessError(f"process {p.idx} runs {sop.op} before join")
        args = resolve_args(p, sop.args)
        obj = self.objects[sop.obj]
        opid = p.op_count
        p.op_count += 1
        d1 = self._probe(p, "pre", opid)
        hid = self.algo["detect_hid"](p.handle)
        self._log(("invoke", self.step, p.idx, (opid, sop.op, obj.oid, args, hid, reissue_of)))
        # Persistent pending-operation record: written before the first
        # shared access, free of charge (reported separately from op costs).
        p.pending_record = (sop, args, obj, opid, d1, script_idx)
        p.cur_opid = opid
        p.cur_script_idx = script_idx
        p.events_in_op = 0
        fn = self.algo["ops"][sop.op]
        p.gen = fn(self.world, obj, p.handle, *args)
        p.started = False
        p.awaiting = None
        p.pending = None
        p.boundary_next = False
        p.block_foot = None
        p.phase = RUNNING
        if crash_now:
            self._crash(p)
            return
        self._finish_delivery(p, self.deliver(p))

    def _finish_delivery(self, p, outcome):
        if outcome[0] == "paused":
            return
        if outcome[0] in ("redundant", "skipcrash"):
            self.skipped = True
            return
        if outcome[0] == "crashpoint":
            self._crash(p)
            return
        value = outcome[1]
        if p.phase == RECOVERING:
            self._recover_done(p)
            return
        sop, args, obj, opid, d1, script_idx = p.pending_record
        self._log(("response", self.step, p.idx, (opid, value)))
        self._probe(p, "post", opid)
        if script_idx is not None:
            p.results[script_idx] = value
        p.pending_record = None
        p.gen = None
        p.phase = READY if p.queue else DONE

    def _crash(self, p):
        p.crash_budget -= 1
        p.gen = None
        p.awaiting = None
        p.pending = None
        p.boundary_next = False
        p.block_foot = None
        if p.phase != RECOVERING:
            # The in-flight client operation is the one now in crashed limbo.
            p.crashed_op = p.pending_record
        self._log(("crash", self.step, p.idx, None))
        p.phase = CRASHED

    def _begin_recover(self, p):
        sop, args, obj, opid, d1, script_idx = p.crashed_op
        self._log(("restart", self.step, p.idx, None))
        self._log(("recover_begin", self.step, p.idx, (opid,)))
        p.gen = self.algo["mod"].recover(self.world, obj, p.handle)
        p.started = False
        p.awaiting = None
        p.pending = None
        p.boundary_next = False
        p.block_foot = None
        p.events_in_op = 0
        p.phase = RECOVERING
        self._finish_delivery(p, self.deliver(p))

    def _recover_done(self, p):
        sop, args, obj, opid, d1, script_idx = p.crashed_op
        self._log(("recover_done", self.step, p.idx, (opid,)))
        d2 = self._probe(p, "post", opid)
        p.gen = None
        p.crashed_op = None
        p.pending_record = None
        if d2 > d1:
            # Operation took effect; detect hands back the response.
            if script_idx is not None:
                resp = True if sop.op not in ALGOS[self.cfg.algo]["writes"] else ACK
                p.results[script_idx] = resp
        else:
            # Safe to repeat: re-issue the same operation.
            p.queue.insert(0, (sop, script_idx, opid))
        p.phase = READY if p.queue else DONE

    # -- main loop ----------------------------------------------------------

    def run(self):
        while True:
            opts = self.options()
            if not opts:
                return self
            choice = self.chooser(self, opts)
            if choice is None:
                # The chooser declined every option (a reduction proved the
                # remaining subtree equivalent to one already explored).
                self.skipped = True
                return self
            record = len(opts) > 1
            if record:
                self.decisions.append((choice, len(opts)))
            kind = opts[choice]
            # Profile a contested step: which of its actions mutate
            # persistent state.  The exploration driver uses it to discard
            # sibling crash placements that cannot be distinguished from an
            # earlier one (the state here is a pure function of the prefix,
            # so the profile is exact for every revisit of this node).
            self._profile = [] if record and kind[0] == "step" else None
            if kind[0] == "start":
                self._invoke(self.procs[kind[1]])
            elif kind[0] == "step":
                p = self.procs[kind[1]]
                self._finish_delivery(p, self.deliver(p))
            elif kind[0] == "crash0":
                self._invoke(self.procs[kind[1]], crash_now=True)
            else:  # ("crash", idx, j)
                p = self.procs[kind[1]]
                self._finish_delivery(p, self.deliver(p, crash_after=kind[2]))
            if record:
                self.profiles.append((kind, self._profile))
            self._profile = None
            if self.skipped:
                return self


def run_with_choices(cfg, choices):
    """Replay a run from a choice string (list of branch indices).

    Choice strings index only the genuine decision points (more than one
    option); exhausted strings fall back to the first option.
    """
    it = iter(choices)

    def chooser(run, opts):
        if len(opts) == 1:
            return 0
        try:
            c = next(it)
        except StopIteration:
            c = 0
        if not 0 <= c < len(opts):
            raise HarnessError(f"choice {c} out of range {len(opts)}")
        return c

    return Run(cfg, chooser).run()


def run_random(cfg, rng: random.Random):
    return Run(cfg, lambda run, opts: rng.randrange(len(opts))).run()
