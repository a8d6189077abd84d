"""Stdio loop speaking the tuner's evaluator protocol.

One JSON object per line with fields kind/id/payload. The tuner sends
`hello` then `space`; this side acknowledges with `hello` once it has both,
then answers every `eval` with exactly one `result` or `error` carrying the
same id, and exits on `shutdown` or end of input. Requests are handled
sequentially; the tuner's cache already deduplicates points.
"""

from __future__ import annotations

import json
import sys
from typing import Any, Mapping, TextIO

from .task import MLTask

PROTOCOL_VERSION = 1


def _validate(space: Mapping[str, Any], assignment: Mapping[str, Any]) -> str | None:
    """Check an assignment against the declared space; None means valid."""
    params = {p["name"]: p for p in space.get("params", [])}
    missing = [name for name in params if name not in assignment]
    if missing:
        return f"missing fields {missing}"
    extra = [name for name in assignment if name not in params]
    if extra:
        return f"unexpected fields {extra}"
    for name, spec in params.items():
        value = assignment[name]
        if spec["kind"] == "real":
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                return f"{name} must be a number"
            if not (spec["lo"] <= float(value) <= spec["hi"]):
                return f"{name}={value} outside [{spec['lo']}, {spec['hi']}]"
        else:
            if value not in spec["values"]:
                return f"{name}={value!r} not one of {spec['values']}"
    return None


def serve(task: MLTask, stdin: TextIO | None = None, stdout: TextIO | None = None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    def emit(kind: str, msg_id: int, payload: dict[str, Any]) -> None:
        stdout.write(json.dumps({"kind": kind, "id": msg_id, "payload": payload}) + "\n")
        stdout.flush()

    got_hello = False
    space: dict[str, Any] | None = None

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            message = json.loads(line)
            kind = message["kind"]
            msg_id = message["id"]
            payload = message.get("payload", {})
        except (ValueError, KeyError, TypeError):
            print(f"mleval: ignoring malformed line {line!r}", file=sys.stderr)
            continue

        if kind == "hello":
            got_hello = True
            if payload.get("protocol") != PROTOCOL_VERSION:
                emit("error", msg_id, {"message": f"unsupported protocol {payload.get('protocol')!r}"})
        elif kind == "space":
            space = dict(payload)
            declared = {p.get("name") for p in space.get("params", [])}
            expected = set(task.param_names())
            if declared != expected:
                emit("error", msg_id, {"message": f"space params {sorted(declared)} do not match model params {sorted(expected)}"})
                space = None
                continue
            if got_hello:
                emit("hello", 0, {"protocol": PROTOCOL_VERSION})
        elif kind == "eval":
            if space is None:
                emit("error", msg_id, {"message": "handshake incomplete: no space document"})
                continue
            problem = _validate(space, payload)
            if problem is not None:
                emit("error", msg_id, {"message": problem})
                continue
            try:
                loss = task.loss(payload)
            except Exception as exc:
                emit("error", msg_id, {"message": f"{type(exc).__name__}: {exc}"})
                continue
            emit("result", msg_id, {"loss": loss})
        elif kind == "shutdown":
            return
        else:
            emit("error", msg_id, {"message": f"unknown message kind {kind!r}"})
