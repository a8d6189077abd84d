"""Experiment runner CLI: a thin client of the HTTP service.

Without --server the requests go through the service app in-process, so the
same routes and validation apply either way. Output is machine readable:
CSV rows to --out (or stdout), summaries and trace lines to stderr.
"""

from __future__ import annotations

import asyncio
import json
from pathlib import Path
from typing import Any

import click
import httpx

from .errors import HierTuneError
from .experiments import load_config_document


def _request(server: str | None, method: str, path: str, payload: dict | None = None) -> dict:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            response = client.request(method, path, json=payload)
    else:
        from .service import app

        async def _go() -> httpx.Response:
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://hiertune.local", timeout=None
            ) as client:
                return await client.request(method, path, json=payload)

        response = asyncio.run(_go())
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise click.ClickException(f"{path}: {detail}")
    return response.json()


def _write_output(out: str | None, csv_text: str, document: dict[str, Any]) -> None:
    if out is None:
        click.echo(csv_text, nl=False)
        return
    path = Path(out)
    if path.suffix == ".json":
        path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    elif path.suffix == ".csv":
        path.write_text(csv_text, encoding="utf-8")
    else:
        raise click.UsageError(f"--out must end in .csv or .json, got {out!r}")


def _print_summary(summary: list[dict[str, Any]]) -> None:
    for s in summary:
        click.echo(
            f"{s['method']}: mean best {s['mean_best']:.6g} "
            f"(95% CI {s['ci95_lo']:.6g}..{s['ci95_hi']:.6g}, "
            f"SE {s['se_best']:.6g}, trials {s['trials']}, "
            f"mean evals {s['mean_evals']:.6g})",
            err=True,
        )


def _print_traces(traces: dict[str, list[str]] | None) -> None:
    if not traces:
        return
    for trial in sorted(traces, key=int):
        for line in traces[trial]:
            click.echo(line, err=True)


@click.command(name="hier-tune")
@click.option("--objective", default=None, help="Built-in objective name or 'extproc:<command>'.")
@click.option("--eta", type=int, default=None, help="Slots sampled per terminal per iteration.")
@click.option("--omega", type=int, default=None, help="Keep-weight for carried-over values.")
@click.option("--c", "c", type=int, default=None, help="Max children per agent.")
@click.option("--iters", type=int, default=None, help="Iteration cap.")
@click.option("--trials", type=int, default=None, help="Independent repetitions per method.")
@click.option("--seed", type=int, default=None, help="Master seed; trial seeds derive from it.")
@click.option(
    "--method",
    "methods",
    multiple=True,
    type=click.Choice(["grat", "random", "lhs"]),
    help="Method to run; repeat for comparisons.",
)
@click.option(
    "--baseline",
    type=click.Choice(["random", "lhs", "none"]),
    default=None,
    help="Shorthand: add one baseline next to the configured methods.",
)
@click.option("--budget-mode", type=click.Choice(["formula", "measured"]), default=None)
@click.option("--omega-policy", default=None, help="'fixed' or 'decay:<p>'.")
@click.option("--workers", type=int, default=None, help="Trial-level concurrency cap.")
@click.option("--patience", type=int, default=None, help="Stop after this many stalled iterations.")
@click.option("--target", type=float, default=None, help="Stop once the incumbent reaches this.")
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON config: search-space document plus a 'run' section.",
)
@click.option("--out", default=None, help="Write results to <path>.csv or <path>.json.")
@click.option("--dump-tree", is_flag=True, help="Print the agent tree as JSON and exit.")
@click.option("--trace", is_flag=True, help="Emit one 'iter,node,kind' line per message to stderr.")
@click.option("--sweep", "sweep_axis", type=click.Choice(["eta", "iterations"]), default=None)
@click.option("--sweep-values", default=None, help="Comma-separated values for the sweep axis.")
@click.option("--server", default=None, help="Base URL of a running service; default is in-process.")
def main(
    objective: str | None,
    eta: int | None,
    omega: int | None,
    c: int | None,
    iters: int | None,
    trials: int | None,
    seed: int | None,
    methods: tuple[str, ...],
    baseline: str | None,
    budget_mode: str | None,
    omega_policy: str | None,
    workers: int | None,
    patience: int | None,
    target: float | None,
    config_path: str | None,
    out: str | None,
    dump_tree: bool,
    trace: bool,
    sweep_axis: str | None,
    sweep_values: str | None,
    server: str | None,
) -> None:
    """Compare tuning methods on an objective and emit per-trial results."""
    space_doc: dict[str, Any] | None = None
    run: dict[str, Any] = {}
    if config_path:
        try:
            doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise click.UsageError(f"could not read config {config_path!r}: {exc}")
        try:
            space, run = load_config_document(doc)
        except HierTuneError as exc:
            raise click.UsageError(str(exc))
        if space is not None:
            space_doc = space.to_document()

    overrides = {
        "objective": objective,
        "eta": eta,
        "omega": omega,
        "c": c,
        "iterations": iters,
        "trials": trials,
        "seed": seed,
        "budget_mode": budget_mode,
        "omega_policy": omega_policy,
        "workers": workers,
        "patience": patience,
        "target": target,
    }
    run.update({k: v for k, v in overrides.items() if v is not None})
    if methods:
        run["methods"] = list(methods)
    if baseline and baseline != "none":
        current = list(run.get("methods", ["grat"]))
        if baseline not in current:
            current.append(baseline)
        run["methods"] = current
    if trace:
        run["trace"] = True
    if space_doc is not None:
        run["space"] = space_doc

    if dump_tree:
        payload = {
            "objective": run.get("objective"),
            "space": run.get("space"),
            "c": run.get("c", 2),
        }
        tree = _request(server, "POST", "/hierarchy/tree", payload)
        text = json.dumps(tree, sort_keys=True, indent=2) + "\n"
        if out:
            Path(out).write_text(text, encoding="utf-8")
        else:
            click.echo(text, nl=False)
        return

    if "objective" not in run:
        raise click.UsageError("an objective is required (--objective or config run.objective)")

    if sweep_axis or sweep_values:
        if not (sweep_axis and sweep_values):
            raise click.UsageError("sweeps need both --sweep and --sweep-values")
        try:
            values = [int(v) for v in sweep_values.split(",") if v.strip()]
        except ValueError:
            raise click.UsageError(f"--sweep-values must be comma-separated integers, got {sweep_values!r}")
        if not values:
            raise click.UsageError("--sweep-values must name at least one value")
        result = _request(server, "POST", "/experiments/sweep", {"axis": sweep_axis, "values": values, "run": run})
        _write_output(out, result["csv"], {k: result[k] for k in ("axis", "values", "runs")})
        for block in result["runs"]:
            _print_summary(block["summary"])
        return

    result = _request(server, "POST", "/experiments/run", run)
    _print_traces(result.get("traces"))
    _write_output(out, result["csv"], {k: result[k] for k in ("config", "rows", "summary")})
    _print_summary(result["summary"])


if __name__ == "__main__":
    main()
