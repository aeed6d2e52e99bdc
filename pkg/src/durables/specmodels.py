"""Sequential specification machines used as oracles by the checker.

Each machine is a pure function ``apply(state, op) -> (state', response)``
over immutable states, so the linearizability search can branch and
backtrack by simply keeping old state values.

Three object types are modelled:

* W-CAS -- a register with Read / Write / CAS.  ``CAS(e, n)`` succeeds and
  installs ``n`` iff the current value equals ``e``; a successful CAS whose
  expected and new values coincide leaves the state untouched.
* LL/SC -- a writable register with per-process link contexts.  ``SC`` and
  ``VL`` by a process with no outstanding ``LL`` return false.
* External-context LL/SC (EC) -- the link context is a sequence value
  handed to the caller by ``ECLL`` and passed back explicitly to ``ECVL`` /
  ``ECSC``, which frees the object from any per-process bookkeeping.  A
  successful ``ECSC`` mints a context strictly greater than the one it
  replaced; *any* greater value is legal, so implementation histories are
  compared to this machine up to an order-preserving renaming of contexts
  (see ``verify``).  The canonical machine here simply increments.

The writable variants additionally accept ``Write``, which unconditionally
installs a value under a fresh context and acknowledges.  ``ACK`` is the
acknowledgement token; it is deliberately equal for all write-like
responses so that checkers never distinguish two spellings of "done".
"""

from __future__ import annotations

ACK = "ack"


class SpecError(Exception):
    """An operation was applied to a machine that does not support it."""


# ---------------------------------------------------------------------------
# W-CAS: state is just the current value.


def wcas_init(value: int):
    return value


def wcas_apply(state, op):
    name, args = op[0], op[1:]
    if name == "read":
        return state, state
    if name == "write":
        return args[0], ACK
    if name == "cas":
        old, new = args
        if state != old:
            return state, False
        return new, True
    raise SpecError(f"w-cas register does not support {name!r}")


# ---------------------------------------------------------------------------
# LL/SC: state is (value, link-contexts) where link-contexts maps process id
# to the value-version it linked.  Versions are internal; responses never
# expose them.


def llsc_init(value: int):
    return (0, value, ())  # (version, value, frozen (pid, version) pairs)


def _links_set(links, pid, ver):
    return tuple(sorted({**dict(links), pid: ver}.items()))

def _links_drop(links, pid):
    return tuple(p for p in links if p[0] != pid)


def llsc_apply(state, pid, op):
    ver, val, links = state
    name, args = op[0], op[1:]
    if name == "ll":
        return (ver, val, _links_set(links, pid, ver)), val
    if name == "vl":
        linked = dict(links).get(pid)
        return state, linked == ver
    if name == "sc":
        linked = dict(links).get(pid)
        if linked != ver:
            return (ver, val, _links_drop(links, pid)), False
        return (ver + 1, args[0], _links_drop(links, pid)), True
    if name == "write":
        return (ver + 1, args[0], links), ACK
    raise SpecError(f"ll/sc register does not support {name!r}")


# ---------------------------------------------------------------------------
# External-context LL/SC.  State is (seq, value).  The canonical machine
# mints seq+1; implementations may mint any strictly larger context.


def ec_init(value: int):
    return (0, value)


def ec_apply(state, op, writable: bool = False):
    seq, val = state
    name, args = op[0], op[1:]
    if name == "ecll":
        return state, (seq, val)
    if name == "ecvl":
        return state, args[0] == seq
    if name == "ecsc":
        s, v = args
        if s != seq:
            return state, False
        return (seq + 1, v), True
    if name == "write":
        if not writable:
            raise SpecError("write applied to a non-writable EC object")
        return (seq + 1, args[0]), ACK
    raise SpecError(f"EC object does not support {name!r}")


def ecw_apply(state, op):
    return ec_apply(state, op, writable=True)
