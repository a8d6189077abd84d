"""External evaluator protocol: objectives as child processes over JSON lines.

Wire format, bit-exact: UTF-8, one JSON object per line with fields `kind`,
`id`, `payload`. The tuner sends `hello` {"protocol": 1} (id 0) and `space`
(id 1, the search-space document); the evaluator answers with a `hello` ack
(id 0) once it has both. Every `eval` (payload: assignment) is answered by
exactly one `result` (payload: {"loss": <finite number>}) or `error` with
the same id; ids correlate, order does not. `shutdown` is always sent on
session close and the child must exit promptly.

One evaluator process serves all agents; requests are multiplexed by id and
may be in flight concurrently.
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Any, Iterator

from .errors import EvaluationError, ProtocolError, SessionError
from .space import Assignment, SearchSpace, sample_uniform_assignment

PROTOCOL_VERSION = 1
KINDS = frozenset({"hello", "space", "eval", "result", "error", "shutdown"})

HELLO_ID = 0
SPACE_ID = 1
FIRST_EVAL_ID = 2

DEFAULT_TIMEOUT = 30.0
SHUTDOWN_GRACE = 5.0


@dataclass(frozen=True)
class WireMessage:
    kind: str
    id: int
    payload: dict[str, Any]

    def encode(self) -> str:
        return json.dumps(
            {"kind": self.kind, "id": self.id, "payload": self.payload},
            separators=(",", ":"),
        )

    @staticmethod
    def decode(line: str) -> "WireMessage":
        try:
            doc = json.loads(line)
            kind = doc["kind"]
            msg_id = doc["id"]
            payload = doc["payload"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed wire line {line!r}: {exc}") from exc
        if kind not in KINDS:
            raise ProtocolError(f"unknown message kind {kind!r}")
        if not isinstance(msg_id, int):
            raise ProtocolError(f"message id must be an integer, got {msg_id!r}")
        if not isinstance(payload, dict):
            raise ProtocolError(f"message payload must be an object, got {payload!r}")
        return WireMessage(kind=kind, id=msg_id, payload=payload)


class _Slot:
    __slots__ = ("event", "message", "failure")

    def __init__(self) -> None:
        self.event = threading.Event()
        self.message: WireMessage | None = None
        self.failure: Exception | None = None


class EvaluatorSession:
    """A live evaluator child process exposed as an objective.

    The session is shareable across threads: writes to the child are
    serialized, responses are dispatched to waiters by id.
    """

    def __init__(self, command: str | list[str], space: SearchSpace, timeout: float = DEFAULT_TIMEOUT):
        self.command = command
        self.space = space
        self.timeout = timeout
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise SessionError(f"could not start evaluator {command!r}: {exc}") from exc
        self._write_lock = threading.Lock()
        self._state_lock = threading.Lock()
        self._pending: dict[int, _Slot] = {}
        self._next_id = FIRST_EVAL_ID
        self._dead: Exception | None = None
        self._closed = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self._handshake()

    def __enter__(self) -> "EvaluatorSession":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _send(self, message: WireMessage) -> None:
        with self._write_lock:
            if self._proc.stdin is None or self._proc.poll() is not None:
                raise SessionError(f"evaluator {self.command!r} is not running")
            try:
                self._proc.stdin.write(message.encode() + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise SessionError(f"evaluator {self.command!r} closed its pipe: {exc}") from exc

    def _read_loop(self) -> None:
        assert self._proc.stdout is not None
        failure: Exception | None = None
        try:
            for line in self._proc.stdout:
                line = line.strip()
                if not line:
                    continue
                message = WireMessage.decode(line)
                with self._state_lock:
                    slot = self._pending.get(message.id)
                    if slot is not None:
                        slot.message = message
                        slot.event.set()
                # Unsolicited ids are dropped; the conformance harness is the
                # strict checker, the session just stays safe.
        except Exception as exc:
            failure = exc
        with self._state_lock:
            self._dead = failure or SessionError(
                f"evaluator {self.command!r} closed its output stream"
            )
            for slot in self._pending.values():
                slot.failure = self._dead
                slot.event.set()

    def _register(self, msg_id: int) -> _Slot:
        slot = _Slot()
        with self._state_lock:
            if self._dead is not None:
                raise SessionError(f"evaluator session failed: {self._dead}")
            self._pending[msg_id] = slot
        return slot

    def _await(self, msg_id: int, slot: _Slot, timeout: float) -> WireMessage:
        try:
            if not slot.event.wait(timeout):
                raise SessionError(
                    f"evaluator {self.command!r} did not answer id {msg_id} within {timeout:.0f}s"
                )
            if slot.message is None:
                raise SessionError(f"evaluator session failed: {slot.failure}")
            return slot.message
        finally:
            with self._state_lock:
                self._pending.pop(msg_id, None)

    def _handshake(self) -> None:
        slot = self._register(HELLO_ID)
        try:
            self._send(WireMessage("hello", HELLO_ID, {"protocol": PROTOCOL_VERSION}))
            self._send(WireMessage("space", SPACE_ID, self.space.to_document()))
            ack = self._await(HELLO_ID, slot, self.timeout)
        except SessionError:
            self.close()
            raise
        if ack.kind != "hello":
            self.close()
            raise ProtocolError(f"expected hello ack, got {ack.kind!r}")

    def evaluate(self, assignment: Assignment) -> float:
        """Send one eval request and block for its result."""
        with self._state_lock:
            msg_id = self._next_id
            self._next_id += 1
        slot = self._register(msg_id)
        self._send(WireMessage("eval", msg_id, dict(assignment)))
        answer = self._await(msg_id, slot, self.timeout)
        if answer.kind == "error":
            raise EvaluationError(
                str(answer.payload.get("message", "evaluator error")), assignment
            )
        if answer.kind != "result":
            raise ProtocolError(f"eval id {msg_id} answered with kind {answer.kind!r}")
        loss = answer.payload.get("loss")
        if not isinstance(loss, (int, float)) or isinstance(loss, bool):
            raise ProtocolError(f"result id {msg_id} has non-numeric loss {loss!r}")
        loss = float(loss)
        if loss != loss or loss in (float("inf"), float("-inf")):
            raise ProtocolError(f"result id {msg_id} has non-finite loss {loss!r}")
        return loss

    def objective(self, name: str | None = None):
        from .objectives import ObjectiveHandle

        return ObjectiveHandle(
            name=name or f"extproc:{self.command}",
            space=self.space,
            evaluate=self.evaluate,
        )

    def close(self) -> None:
        """Send shutdown and make sure the child exits."""
        if self._closed:
            return
        self._closed = True
        try:
            with self._state_lock:
                msg_id = self._next_id
                self._next_id += 1
            self._send(WireMessage("shutdown", msg_id, {}))
        except SessionError:
            pass
        try:
            self._proc.wait(timeout=SHUTDOWN_GRACE)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()
        if self._proc.stdin is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        self._reader.join(timeout=1.0)


def spawn_evaluator(
    command: str | list[str], space: SearchSpace, timeout: float = DEFAULT_TIMEOUT
) -> EvaluatorSession:
    """Start an evaluator child and complete the handshake."""
    return EvaluatorSession(command, space, timeout=timeout)


class _QueueReader:
    """Line reader used by the conformance harness; strict, queue based."""

    def __init__(self, proc: subprocess.Popen):
        self._queue: queue.Queue[str | None] = queue.Queue()
        self._thread = threading.Thread(target=self._pump, args=(proc,), daemon=True)
        self._thread.start()

    def _pump(self, proc: subprocess.Popen) -> None:
        assert proc.stdout is not None
        for line in proc.stdout:
            if line.strip():
                self._queue.put(line.strip())
        self._queue.put(None)

    def get(self, timeout: float) -> str | None:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            raise ProtocolError(f"no evaluator output within {timeout:.1f}s")

    def empty_after(self, grace: float) -> bool:
        time.sleep(grace)
        return self._queue.empty()


def run_conformance(
    command: str | list[str],
    space: SearchSpace,
    *,
    evals: int = 5,
    seed: int = 0,
    timeout: float = DEFAULT_TIMEOUT,
    startup_grace: float = 0.3,
) -> list[str]:
    """Drive an evaluator through the protocol and verify its conduct.

    Checks handshake ordering (the ack must wait for the space document),
    id correlation under out-of-order and concurrent requests, finite losses,
    and exit within the shutdown grace. Raises ProtocolError on the first
    violation; returns the list of probes that passed.
    """
    import random as _random

    argv = shlex.split(command) if isinstance(command, str) else list(command)
    proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1)
    assert proc.stdin is not None
    passed: list[str] = []
    reader = _QueueReader(proc)

    def send(message: WireMessage) -> None:
        proc.stdin.write(message.encode() + "\n")
        proc.stdin.flush()

    try:
        send(WireMessage("hello", HELLO_ID, {"protocol": PROTOCOL_VERSION}))
        if not reader.empty_after(startup_grace):
            raise ProtocolError("evaluator answered before receiving the space document")
        passed.append("ack-waits-for-space")

        send(WireMessage("space", SPACE_ID, space.to_document()))
        ack = WireMessage.decode(reader.get(timeout) or "")
        if ack.kind != "hello" or ack.id != HELLO_ID:
            raise ProtocolError(f"expected hello ack id {HELLO_ID}, got {ack.kind!r} id {ack.id}")
        if ack.payload.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolError(f"hello ack must carry protocol {PROTOCOL_VERSION}")
        passed.append("handshake")

        rng = _random.Random(seed)
        ids = [FIRST_EVAL_ID + 3 * i + 1 for i in range(evals)]
        points = {i: sample_uniform_assignment(space, rng) for i in ids}
        for msg_id in ids:
            send(WireMessage("eval", msg_id, dict(points[msg_id])))
        outstanding = set(ids)
        while outstanding:
            answer = WireMessage.decode(reader.get(timeout) or "")
            if answer.id not in outstanding:
                raise ProtocolError(f"unexpected or duplicate answer id {answer.id}")
            if answer.kind == "result":
                loss = answer.payload.get("loss")
                if not isinstance(loss, (int, float)) or isinstance(loss, bool) or not (
                    float(loss) == float(loss) and abs(float(loss)) != float("inf")
                ):
                    raise ProtocolError(f"id {answer.id}: loss must be a finite number, got {loss!r}")
            elif answer.kind != "error":
                raise ProtocolError(f"id {answer.id}: eval answered with kind {answer.kind!r}")
            outstanding.discard(answer.id)
        passed.append("id-correlation")

        send(WireMessage("shutdown", max(ids) + 1, {}))
        try:
            proc.wait(timeout=SHUTDOWN_GRACE)
        except subprocess.TimeoutExpired:
            raise ProtocolError(f"evaluator did not exit within {SHUTDOWN_GRACE:.0f}s of shutdown")
        passed.append("shutdown")
        return passed
    finally:
        if proc.poll() is None:
            proc.kill()
            proc.wait()


def iter_wire_lines(lines: Iterator[str]) -> Iterator[WireMessage]:
    """Decode a stream of wire lines, skipping blanks."""
    for line in lines:
        line = line.strip()
        if line:
            yield WireMessage.decode(line)
