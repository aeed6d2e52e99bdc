"""Trace serialization: JSON lines with a stable field order.

Every record carries the same nine fields -- ``step, proc, handle, obj,
kind, op, args, result, monitor`` -- with ``null`` where a field does not
apply.  Encoding is deterministic (fixed key order, no whitespace
variation), so identical runs produce byte-identical files, and
:func:`decode_lines` restores exactly the in-memory tuples the harness
produced (JSON arrays become tuples again).
"""

from __future__ import annotations

import json

_FIELDS = ("step", "proc", "handle", "obj", "kind", "op", "args", "result", "monitor")

_MEM_OPS = {"r": "read", "w": "write", "c": "cas"}
_MEM_TAGS = {v: k for k, v in _MEM_OPS.items()}


def _rec(**kw):
    return {f: kw.get(f) for f in _FIELDS}


def encode_entry(e) -> dict:
    tag = e[0]
    if tag == "mem":
        _, step, proc, mk, cell, args, res = e
        return _rec(step=step, proc=proc, kind="mem", op=_MEM_OPS[mk],
                    args=[cell, args], result=res)
    if tag == "invoke":
        _, step, proc, (opid, op, oid, args, hid, reissue) = e
        return _rec(step=step, proc=proc, handle=hid, obj=oid, kind="invoke",
                    op=op, args=[opid, list(args), reissue])
    if tag == "response":
        _, step, proc, (opid, result) = e
        return _rec(step=step, proc=proc, kind="response", args=[opid], result=result)
    if tag == "probe":
        _, step, proc, (phase, opid, d, r) = e
        return _rec(step=step, proc=proc, kind="monitor", op="detect_probe",
                    args=[phase, opid], result=[d, r])
    if tag == "emit":
        _, step, proc, payload = e
        return _rec(step=step, proc=proc, kind="monitor", op="emit", monitor=list(payload))
    if tag in ("crash", "restart"):
        _, step, proc, _payload = e
        return _rec(step=step, proc=proc, kind=tag)
    if tag in ("recover_begin", "recover_done"):
        _, step, proc, (opid,) = e
        return _rec(step=step, proc=proc, kind=tag, args=[opid])
    if tag.startswith("reg_"):
        _, step, proc, payload = e
        return _rec(step=step, kind="monitor", op=tag, monitor=list(payload))
    raise ValueError(f"unknown trace entry {e!r}")


def _tup(x):
    if isinstance(x, list):
        return tuple(_tup(v) for v in x)
    return x


def decode_record(r: dict):
    kind = r["kind"]
    if kind == "mem":
        cell, args = r["args"]
        return ("mem", r["step"], r["proc"], _MEM_TAGS[r["op"]], cell, _tup(args), _tup(r["result"]))
    if kind == "invoke":
        opid, args, reissue = r["args"]
        return ("invoke", r["step"], r["proc"],
                (opid, r["op"], r["obj"], _tup(args), r["handle"], reissue))
    if kind == "response":
        return ("response", r["step"], r["proc"], (r["args"][0], _tup(r["result"])))
    if kind == "monitor":
        if r["op"] == "detect_probe":
            phase, opid = r["args"]
            d, res = r["result"]
            return ("probe", r["step"], r["proc"], (phase, opid, d, res))
        if r["op"] == "emit":
            return ("emit", r["step"], r["proc"], _tup(r["monitor"]))
        return (r["op"], r["step"], -1, _tup(r["monitor"]))
    if kind in ("crash", "restart"):
        return (kind, r["step"], r["proc"], None)
    if kind in ("recover_begin", "recover_done"):
        return (kind, r["step"], r["proc"], (r["args"][0],))
    raise ValueError(f"unknown trace record {r!r}")


def encode_lines(trace) -> str:
    return "".join(
        json.dumps(encode_entry(e), separators=(",", ":"), sort_keys=False) + "\n"
        for e in trace
    )


def decode_lines(text: str):
    return [decode_record(json.loads(line)) for line in text.splitlines() if line.strip()]


def write_trace(path, trace):
    with open(path, "w") as f:
        f.write(encode_lines(trace))


def read_trace(path):
    with open(path) as f:
        return decode_lines(f.read())
