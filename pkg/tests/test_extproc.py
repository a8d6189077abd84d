import sys
import threading
import time

import pytest

from hiertune.errors import EvaluationError, ProtocolError, SessionError
from hiertune.extproc import WireMessage, run_conformance, spawn_evaluator
from hiertune.objectives import make_box_space

# Child evaluators are spawned as `python -c <script>`. They implement the
# wire protocol with different behaviors, including deliberately broken ones.

CHILD_PREAMBLE = """
import json, sys

def emit(kind, msg_id, payload):
    sys.stdout.write(json.dumps({"kind": kind, "id": msg_id, "payload": payload}) + "\\n")
    sys.stdout.flush()

def serve(respond, ack_early=False, exit_on_shutdown=True):
    got_hello = got_space = False
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        msg = json.loads(line)
        kind, msg_id, payload = msg["kind"], msg["id"], msg["payload"]
        if kind == "hello":
            got_hello = True
            if ack_early:
                emit("hello", 0, {"protocol": 1})
        elif kind == "space":
            got_space = True
            if not ack_early:
                emit("hello", 0, {"protocol": 1})
        elif kind == "eval":
            respond(msg_id, payload, emit)
        elif kind == "shutdown":
            if exit_on_shutdown:
                return
"""

ECHO_CHILD = CHILD_PREAMBLE + """
serve(lambda i, a, emit: emit("result", i, {"loss": 0.0}))
"""

VALUE_CHILD = CHILD_PREAMBLE + """
serve(lambda i, a, emit: emit("result", i, {"loss": float(a["x1"])}))
"""

ERROR_CHILD = CHILD_PREAMBLE + """
serve(lambda i, a, emit: emit("error", i, {"message": "cannot evaluate"}))
"""

NAN_CHILD = CHILD_PREAMBLE + """
serve(lambda i, a, emit: emit("result", i, {"loss": float("nan")}))
"""

GARBAGE_CHILD = CHILD_PREAMBLE + """
def respond(i, a, emit):
    sys.stdout.write("this is not json\\n")
    sys.stdout.flush()
serve(respond)
"""

SILENT_CHILD = CHILD_PREAMBLE + """
serve(lambda i, a, emit: None)
"""

REORDER_CHILD = CHILD_PREAMBLE + """
buffered = []
def respond(i, a, emit):
    buffered.append((i, a))
    if len(buffered) == 2:
        for j, b in reversed(buffered):
            emit("result", j, {"loss": float(b["x1"])})
        buffered.clear()
serve(respond)
"""

EARLY_ACK_CHILD = CHILD_PREAMBLE + """
serve(lambda i, a, emit: emit("result", i, {"loss": 0.0}), ack_early=True)
"""

NO_EXIT_CHILD = CHILD_PREAMBLE + """
import time
serve(lambda i, a, emit: emit("result", i, {"loss": 0.0}), exit_on_shutdown=False)
time.sleep(60)
"""


def command(script):
    return [sys.executable, "-c", script]


SPACE = make_box_space(2)
POINT = {"x1": 0.25, "x2": 0.5}


class TestSession:
    def test_echo_child_returns_zero_loss(self):
        with spawn_evaluator(command(ECHO_CHILD), SPACE) as session:
            assert session.evaluate(POINT) == 0.0

    def test_losses_follow_the_assignment(self):
        with spawn_evaluator(command(VALUE_CHILD), SPACE) as session:
            assert session.evaluate({"x1": 0.125, "x2": 0.0}) == 0.125
            assert session.evaluate({"x1": 0.75, "x2": 0.0}) == 0.75

    def test_error_message_becomes_evaluation_error(self):
        with spawn_evaluator(command(ERROR_CHILD), SPACE) as session:
            with pytest.raises(EvaluationError, match="cannot evaluate"):
                session.evaluate(POINT)

    def test_nan_loss_is_a_protocol_error(self):
        with spawn_evaluator(command(NAN_CHILD), SPACE) as session:
            with pytest.raises(ProtocolError):
                session.evaluate(POINT)

    def test_garbage_line_fails_the_session(self):
        with spawn_evaluator(command(GARBAGE_CHILD), SPACE, timeout=5.0) as session:
            with pytest.raises(SessionError):
                session.evaluate(POINT)

    def test_killed_child_raises_session_error(self):
        session = spawn_evaluator(command(ECHO_CHILD), SPACE, timeout=5.0)
        try:
            session._proc.kill()
            session._proc.wait()
            with pytest.raises(SessionError):
                session.evaluate(POINT)
        finally:
            session.close()

    def test_unanswered_eval_times_out(self):
        with spawn_evaluator(command(SILENT_CHILD), SPACE, timeout=0.5) as session:
            start = time.monotonic()
            with pytest.raises(SessionError, match="did not answer"):
                session.evaluate(POINT)
            assert time.monotonic() - start < 5.0

    def test_shutdown_makes_child_exit(self):
        session = spawn_evaluator(command(ECHO_CHILD), SPACE)
        session.evaluate(POINT)
        session.close()
        assert session._proc.poll() is not None

    def test_out_of_order_answers_correlate_by_id(self):
        with spawn_evaluator(command(REORDER_CHILD), SPACE, timeout=10.0) as session:
            results: dict[float, float] = {}

            def ask(x):
                results[x] = session.evaluate({"x1": x, "x2": 0.0})

            threads = [threading.Thread(target=ask, args=(x,)) for x in (0.2, 0.8)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            assert results == {0.2: 0.2, 0.8: 0.8}

    def test_objective_handle_wraps_the_session(self):
        with spawn_evaluator(command(VALUE_CHILD), SPACE) as session:
            handle = session.objective()
            assert handle.space is SPACE
            assert handle.evaluate({"x1": 0.5, "x2": 0.1}) == 0.5

    def test_missing_binary_is_a_session_error(self):
        with pytest.raises(SessionError):
            spawn_evaluator(["/nonexistent/evaluator"], SPACE)


class TestWireMessage:
    def test_round_trip(self):
        msg = WireMessage("eval", 3, {"C": 1.5, "kernel": "rbf"})
        again = WireMessage.decode(msg.encode())
        assert again == msg

    def test_wire_example_shape(self):
        line = '{"kind":"eval","id":3,"payload":{"C":1.5,"kernel":"rbf"}}'
        msg = WireMessage.decode(line)
        assert (msg.kind, msg.id) == ("eval", 3)
        assert msg.payload == {"C": 1.5, "kernel": "rbf"}

    def test_decode_rejects_garbage(self):
        with pytest.raises(ProtocolError):
            WireMessage.decode("not json")
        with pytest.raises(ProtocolError):
            WireMessage.decode('{"kind":"warp","id":1,"payload":{}}')
        with pytest.raises(ProtocolError):
            WireMessage.decode('{"kind":"eval","id":"x","payload":{}}')


class TestConformance:
    def test_compliant_child_passes(self):
        passed = run_conformance(command(ECHO_CHILD), SPACE, evals=4)
        assert passed == ["ack-waits-for-space", "handshake", "id-correlation", "shutdown"]

    def test_early_ack_child_fails_ordering(self):
        with pytest.raises(ProtocolError, match="before receiving the space"):
            run_conformance(command(EARLY_ACK_CHILD), SPACE)

    def test_silent_child_fails_correlation(self):
        with pytest.raises(ProtocolError):
            run_conformance(command(SILENT_CHILD), SPACE, timeout=1.0)

    def test_non_exiting_child_fails_shutdown(self):
        with pytest.raises(ProtocolError, match="did not exit"):
            run_conformance(command(NO_EXIT_CHILD), SPACE, timeout=5.0)

    def test_nan_loss_fails(self):
        with pytest.raises(ProtocolError, match="finite"):
            run_conformance(command(NAN_CHILD), SPACE, timeout=5.0)
