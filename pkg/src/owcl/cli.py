"""Command-line front end.

Each subcommand is a thin client of the HTTP service: it builds the request
model, posts it (to an in-process app by default, or to a running server via
--server / OWCL_SERVER), and prints the response. Exit codes: 0 success,
1 validation error, 2 runtime error.
"""

from __future__ import annotations

import json
import os
import sys

import click

DEFAULTS = {
    "scenario": "",
    "dataset_dir": "",
    "dimension": 32,
    "tasks": 5,
    "classes_per_task": 4,
    "train_per_class": 100,
    "test_per_class": 50,
    "open_classes": 3,
    "separation": 8.0,
    "sigma": 1.0,
    "drift": 0.0,
    "recurrence": 0.0,
    "nuisance_rank": 0,
    "nuisance_sigma": 0.0,
    "scenario_seed": 0,
    "m": 2500,
    "nrp_seed": 0,
    "sigma_w": 1.0,
    "nonlinearity": "relu",
    "ridge_mode": "scaled",
    "ridge_lambda": 1.0,
    "ridge_scale": 0.1,
    "dap_positive": 64,
    "dap_negative": 8,
    "zeta_lo": 0.8,
    "zeta_hi": 1.25,
    "pair_cap": 512,
    "dap_seed": 0,
    "epsilon": 1e-3,
    "max_iters": 100,
    "seeds": "0",
    "out_dir": "",
    "mode": "full",
    "ablation_percentile": 0.05,
}


class Client:
    """Posts request models either in-process or over HTTP."""

    def __init__(self, server: str | None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            from fastapi.testclient import TestClient

            from .service import app

            self._client = TestClient(app)

    def post(self, path: str, payload: dict) -> dict:
        resp = self._client.post(path, json=payload)
        if resp.status_code >= 500:
            click.echo(f"error: {resp.text}", err=True)
            sys.exit(2)
        if resp.status_code >= 400:
            detail = resp.json().get("detail", resp.text)
            click.echo(f"invalid request: {detail}", err=True)
            sys.exit(1)
        return resp.json()


@click.group()
@click.option(
    "--server",
    envvar="OWCL_SERVER",
    default=None,
    help="Base URL of a running service; omitted means run in-process.",
)
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Open-world continual-learning engine."""
    ctx.obj = Client(server)


def _echo_json(doc: dict) -> None:
    click.echo(json.dumps(doc, indent=2, sort_keys=True))


@main.command()
@click.option("--scenario", required=True, type=click.Choice(["CINO", "CIRO", "KINO", "KIRO"]))
@click.option("--dimension", default=32, show_default=True)
@click.option("--tasks", "num_tasks", default=5, show_default=True)
@click.option("--classes-per-task", default=4, show_default=True)
@click.option("--train-per-class", default=100, show_default=True)
@click.option("--test-per-class", default=50, show_default=True)
@click.option("--open-classes", default=5, show_default=True)
@click.option("--separation", default=8.0, show_default=True)
@click.option("--sigma", default=1.0, show_default=True)
@click.option("--drift", default=0.0, show_default=True)
@click.option("--recurrence", default=0.0, show_default=True)
@click.option("--nuisance-rank", default=0, show_default=True)
@click.option("--nuisance-sigma", default=0.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_obj
def simulate(client: Client, **kw) -> None:
    """Generate a synthetic task stream and write it as task files."""
    out_dir = kw.pop("out_dir")
    payload = {
        "config": {
            "scenario": kw["scenario"],
            "dimension": kw["dimension"],
            "num_tasks": kw["num_tasks"],
            "classes_per_task": kw["classes_per_task"],
            "train_per_class": kw["train_per_class"],
            "test_per_class": kw["test_per_class"],
            "num_open_classes": kw["open_classes"],
            "class_separation": kw["separation"],
            "within_class_sigma": kw["sigma"],
            "drift_magnitude": kw["drift"],
            "recurrence_rate": kw["recurrence"],
            "nuisance_rank": kw["nuisance_rank"],
            "nuisance_sigma": kw["nuisance_sigma"],
            "seed": kw["seed"],
        },
        "out_dir": out_dir,
    }
    _echo_json(client.post("/simulate", payload))


def _nrp_options(fn):
    fn = click.option("--m", default=2500, show_default=True, help="Projection width.")(fn)
    fn = click.option("--nrp-seed", default=0, show_default=True)(fn)
    fn = click.option("--sigma-w", default=1.0, show_default=True)(fn)
    fn = click.option(
        "--nonlinearity", default="relu", type=click.Choice(["relu", "identity"]), show_default=True
    )(fn)
    return fn


def _dap_options(fn):
    fn = click.option("--dap-positive", default=64, show_default=True)(fn)
    fn = click.option("--dap-negative", default=8, show_default=True)(fn)
    fn = click.option("--zeta-lo", default=0.8, show_default=True)(fn)
    fn = click.option("--zeta-hi", default=1.25, show_default=True)(fn)
    fn = click.option("--pair-cap", default=512, show_default=True)(fn)
    fn = click.option("--dap-seed", default=0, show_default=True)(fn)
    return fn


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
@click.option("--task", "task_paths", type=click.Path(), multiple=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@_nrp_options
@click.option(
    "--ridge-mode",
    default="scaled",
    type=click.Choice(["scaled", "fixed", "auto"]),
    show_default=True,
    help="scaled: lambda = scale * trace(G)/M; fixed: constant; auto: residual sweep.",
)
@click.option("--ridge-lambda", default=1.0, show_default=True)
@click.option("--ridge-scale", default=0.1, show_default=True)
@_dap_options
@click.option("--epsilon", default=1e-3, show_default=True, help="Threshold search width.")
@click.option("--max-iters", default=100, show_default=True)
@click.option("--run-seed", default=0, show_default=True)
@click.option("--resume", "resume_state", type=click.Path(), default=None)
@click.option("--start-task", default=0, show_default=True)
@click.pass_obj
def train(client: Client, **kw) -> None:
    """Train on task files in order; writes a state checkpoint per task."""
    payload = {
        "task_paths": list(kw["task_paths"]) or None,
        "manifest_path": kw["manifest_path"],
        "out_dir": kw["out_dir"],
        "nrp": {
            "m": kw["m"],
            "seed": kw["nrp_seed"],
            "sigma_w": kw["sigma_w"],
            "nonlinearity": kw["nonlinearity"],
        },
        "ridge_mode": kw["ridge_mode"],
        "ridge_lambda": kw["ridge_lambda"],
        "ridge_scale": kw["ridge_scale"],
        "dap": {
            "n_positive_per_class": kw["dap_positive"],
            "n_negative_per_pair": kw["dap_negative"],
            "zeta_lo": kw["zeta_lo"],
            "zeta_hi": kw["zeta_hi"],
            "pair_cap": kw["pair_cap"],
            "seed": kw["dap_seed"],
        },
        "search_epsilon": kw["epsilon"],
        "search_max_iters": kw["max_iters"],
        "run_seed": kw["run_seed"],
        "resume_state": kw["resume_state"],
        "start_task": kw["start_task"],
    }
    _echo_json(client.post("/train", payload))


@main.command("eval")
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
@click.option("--task", "task_paths", type=click.Path(), multiple=True)
@click.option("--checkpoints", "checkpoint_dir", type=click.Path(), default=None)
@click.option("--state", "state_path", type=click.Path(), default=None)
@click.option(
    "--cutoff",
    "cutoff_rule",
    default="calibrated",
    type=click.Choice(["calibrated", "percentile"]),
    show_default=True,
    help="Verdict rule: calibrated threshold or training-score percentile.",
)
@click.option("--percentile", default=0.05, show_default=True)
@click.option("--seed-label", default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_obj
def eval_cmd(client: Client, **kw) -> None:
    """Evaluate test splits against saved model state."""
    payload = {
        "task_paths": list(kw["task_paths"]) or None,
        "manifest_path": kw["manifest_path"],
        "checkpoint_dir": kw["checkpoint_dir"],
        "state_path": kw["state_path"],
        "cutoff_rule": kw["cutoff_rule"],
        "percentile": kw["percentile"],
        "seed_label": kw["seed_label"],
        "out_dir": kw["out_dir"],
    }
    _echo_json(client.post("/eval", payload))


@main.command()
@click.option("--input", "report_paths", type=click.Path(), multiple=True, required=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_obj
def report(client: Client, report_paths, out_dir) -> None:
    """Aggregate per-seed reports into mean/std summaries."""
    payload = {"report_paths": list(report_paths), "out_dir": out_dir}
    _echo_json(client.post("/report", payload))


def parse_config_file(path: str) -> dict:
    """Flat key=value file; blank lines and #-comments ignored."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise click.ClickException(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in DEFAULTS:
                raise click.ClickException(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value.strip()
    return values


def _coerce(key: str, value: str):
    default = DEFAULTS[key]
    if isinstance(default, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def build_run_request(values: dict[str, str]) -> dict:
    """Assemble the /run payload from flat config keys (see DEFAULTS)."""
    cfg = {k: _coerce(k, v) if isinstance(v, str) else v for k, v in values.items()}
    for key, default in DEFAULTS.items():
        cfg.setdefault(key, default)
    payload: dict = {
        "nrp": {
            "m": cfg["m"],
            "seed": cfg["nrp_seed"],
            "sigma_w": cfg["sigma_w"],
            "nonlinearity": cfg["nonlinearity"],
        },
        "ridge_mode": cfg["ridge_mode"],
        "ridge_lambda": cfg["ridge_lambda"],
        "ridge_scale": cfg["ridge_scale"],
        "dap": {
            "n_positive_per_class": cfg["dap_positive"],
            "n_negative_per_pair": cfg["dap_negative"],
            "zeta_lo": cfg["zeta_lo"],
            "zeta_hi": cfg["zeta_hi"],
            "pair_cap": cfg["pair_cap"],
            "seed": cfg["dap_seed"],
        },
        "search_epsilon": cfg["epsilon"],
        "search_max_iters": cfg["max_iters"],
        "seeds": [int(s) for s in str(cfg["seeds"]).split(",") if s != ""],
        "output_dir": cfg["out_dir"] or os.environ.get("OWCL_OUTPUT_DIR", ""),
        "mode": cfg["mode"],
        "ablation_percentile": cfg["ablation_percentile"],
    }
    if cfg["scenario"]:
        payload["scenario"] = {
            "scenario": cfg["scenario"],
            "dimension": cfg["dimension"],
            "num_tasks": cfg["tasks"],
            "classes_per_task": cfg["classes_per_task"],
            "train_per_class": cfg["train_per_class"],
            "test_per_class": cfg["test_per_class"],
            "num_open_classes": cfg["open_classes"],
            "class_separation": cfg["separation"],
            "within_class_sigma": cfg["sigma"],
            "drift_magnitude": cfg["drift"],
            "recurrence_rate": cfg["recurrence"],
            "nuisance_rank": cfg["nuisance_rank"],
            "nuisance_sigma": cfg["nuisance_sigma"],
            "seed": cfg["scenario_seed"],
        }
    if cfg["dataset_dir"]:
        payload["dataset_dir"] = cfg["dataset_dir"]
    return payload


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option(
    "--set",
    "overrides",
    multiple=True,
    metavar="KEY=VALUE",
    help="Override a config key (repeatable). Keys: " + ", ".join(sorted(DEFAULTS)),
)
@click.pass_obj
def run(client: Client, config_path: str | None, overrides: tuple[str, ...]) -> None:
    """Run the whole pipeline: simulate/load, train, calibrate, evaluate, report."""
    values = parse_config_file(config_path) if config_path else {}
    for item in overrides:
        if "=" not in item:
            raise click.ClickException(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        if key not in DEFAULTS:
            raise click.ClickException(f"unknown config key {key!r}")
        values[key] = value
    _echo_json(client.post("/run", build_run_request(values)))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Start the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
