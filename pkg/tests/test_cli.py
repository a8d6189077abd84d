import json
import sys

import pytest
from click.testing import CliRunner

from hiertune.cli import main

CHILD_SCRIPT = """
import json, sys

def emit(obj):
    sys.stdout.write(json.dumps(obj) + "\\n")
    sys.stdout.flush()

for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    msg = json.loads(line)
    if msg["kind"] == "space":
        emit({"kind": "hello", "id": 0, "payload": {"protocol": 1}})
    elif msg["kind"] == "eval":
        point = msg["payload"]
        loss = (point["x1"] - 0.2) ** 2 + (point["x2"] - 0.7) ** 2
        emit({"kind": "result", "id": msg["id"], "payload": {"loss": loss}})
    elif msg["kind"] == "shutdown":
        break
"""

BOX2_DOC = {
    "params": [
        {"name": "x1", "kind": "real", "lo": 0.0, "hi": 1.0, "scale": "linear"},
        {"name": "x2", "kind": "real", "lo": 0.0, "hi": 1.0, "scale": "linear"},
    ],
    "objective": ["x1", "x2"],
    "fixed": {},
}


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    result = runner.invoke(main, list(args), catch_exceptions=False)
    return result


def test_dump_tree_golden(runner):
    result = invoke(runner, "--objective", "hartmann3", "--c", "2", "--dump-tree")
    assert result.exit_code == 0
    doc = json.loads(result.output)
    assert [n["primary"] for n in doc["nodes"]] == [
        ["x1", "x2", "x3"],
        ["x1", "x2"],
        ["x3"],
        ["x1"],
        ["x2"],
    ]


def test_run_writes_csv(runner, tmp_path):
    out = tmp_path / "rows.csv"
    result = invoke(
        runner,
        "--objective", "sphere", "--method", "grat", "--method", "random",
        "--eta", "2", "--iters", "2", "--trials", "2", "--seed", "9",
        "--budget-mode", "measured", "--out", str(out),
    )
    assert result.exit_code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "trial,method,objective,eta,omega,iters,best,evals,last_best_iter"
    assert len(lines) == 5


def test_stdout_carries_the_csv_without_out_flag(runner):
    result = invoke(runner, "--objective", "sphere", "--eta", "1", "--iters", "1", "--trials", "1")
    assert result.exit_code == 0
    assert result.output.splitlines()[0].startswith("trial,method")


def test_json_output_document(runner, tmp_path):
    out = tmp_path / "artifact.json"
    result = invoke(
        runner,
        "--objective", "sphere", "--eta", "2", "--iters", "1", "--trials", "1",
        "--out", str(out),
    )
    assert result.exit_code == 0
    doc = json.loads(out.read_text())
    assert set(doc) == {"config", "rows", "summary"}
    assert doc["config"]["objective"] == "sphere"


def test_byte_identical_reruns_with_concurrency(runner, tmp_path):
    args = [
        "--objective", "hartmann3", "--method", "grat", "--eta", "3", "--iters", "3",
        "--trials", "4", "--seed", "123", "--workers", "2",
    ]
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert invoke(runner, *args, "--out", str(out_a)).exit_code == 0
    assert invoke(runner, *args, "--out", str(out_b)).exit_code == 0
    assert out_a.read_bytes() == out_b.read_bytes()


def test_config_file_with_flag_override(runner, tmp_path):
    config = dict(BOX2_DOC)
    config["run"] = {"objective": "sphere", "eta": 5, "trials": 1, "iterations": 1}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    out = tmp_path / "rows.csv"
    # The box-2 space conflicts with sphere's own; drop it by overriding objective
    config.pop("params"), config.pop("objective"), config.pop("fixed")
    path.write_text(json.dumps(config))
    result = invoke(runner, "--config", str(path), "--eta", "2", "--out", str(out))
    assert result.exit_code == 0
    row = out.read_text().splitlines()[1].split(",")
    assert row[3] == "2"  # eta column: flag wins over config

    result = invoke(runner, "--config", str(path), "--out", str(out))
    row = out.read_text().splitlines()[1].split(",")
    assert row[3] == "5"  # config value used when no flag


def test_baseline_flag_adds_method(runner, tmp_path):
    out = tmp_path / "rows.csv"
    result = invoke(
        runner,
        "--objective", "sphere", "--eta", "1", "--iters", "1", "--trials", "1",
        "--baseline", "lhs", "--out", str(out),
    )
    assert result.exit_code == 0
    methods = [line.split(",")[1] for line in out.read_text().splitlines()[1:]]
    assert methods == ["grat", "lhs"]


def test_sweep_long_csv(runner, tmp_path):
    out = tmp_path / "sweep.csv"
    result = invoke(
        runner,
        "--objective", "sphere", "--eta", "2", "--trials", "1",
        "--sweep", "iterations", "--sweep-values", "1,2,3", "--out", str(out),
    )
    assert result.exit_code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 4
    assert [line.split(",")[5] for line in lines[1:]] == ["1", "2", "3"]


def test_trace_lines_go_to_stderr(runner):
    result = runner.invoke(
        main,
        ["--objective", "sphere", "--eta", "1", "--iters", "1", "--trials", "1", "--trace"],
        catch_exceptions=False,
    )
    assert result.exit_code == 0


class TestUsageErrors:
    def test_objective_required(self, runner):
        result = runner.invoke(main, [])
        assert result.exit_code != 0
        assert "objective is required" in result.output

    def test_sweep_needs_values(self, runner):
        result = runner.invoke(main, ["--objective", "sphere", "--sweep", "eta"])
        assert result.exit_code != 0

    def test_bad_sweep_values(self, runner):
        result = runner.invoke(
            main, ["--objective", "sphere", "--sweep", "eta", "--sweep-values", "a,b"]
        )
        assert result.exit_code != 0

    def test_bad_out_suffix(self, runner):
        result = runner.invoke(main, ["--objective", "sphere", "--out", "results.txt"])
        assert result.exit_code != 0

    def test_service_error_is_surfaced(self, runner):
        result = runner.invoke(main, ["--objective", "rosenbrock"])
        assert result.exit_code != 0
        assert "unknown objective" in result.output


def test_extproc_end_to_end(runner, tmp_path):
    child = tmp_path / "child.py"
    child.write_text(CHILD_SCRIPT)
    config = dict(BOX2_DOC)
    config["run"] = {
        "objective": f"extproc:{sys.executable} {child}",
        "methods": ["grat", "random"],
        "eta": 3,
        "iterations": 2,
        "trials": 2,
        "seed": 4,
        "budget_mode": "measured",
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    out = tmp_path / "rows.csv"
    result = invoke(runner, "--config", str(path), "--out", str(out))
    assert result.exit_code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 4
    bests = [float(line.split(",")[6]) for line in lines[1:]]
    assert all(0.0 <= b <= 2.0 for b in bests)
