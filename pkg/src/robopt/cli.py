"""Command-line client for the robopt service.

Every subcommand builds a request, sends it to the service (in-process by
default, or a remote instance via --server), and writes the response to
files or stdout.  Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import asyncio
import json
import logging
import sys
from pathlib import Path

import click
import httpx

from .data_synth import read_dataset_csv


class ServiceClient:
    """Thin HTTP client; in-process ASGI when no server URL is given."""

    def __init__(self, server: str | None = None):
        self.server = server

    def request(self, method: str, path: str, payload=None) -> dict:
        if self.server:
            with httpx.Client(base_url=self.server, timeout=None) as client:
                response = client.request(method, path, json=payload)
        else:
            from .service import create_app

            async def go():
                transport = httpx.ASGITransport(app=create_app())
                async with httpx.AsyncClient(
                    transport=transport, base_url="http://robopt.local", timeout=None
                ) as client:
                    return await client.request(method, path, json=payload)

            response = asyncio.run(go())
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail", response.text)
            except Exception:
                detail = response.text
            raise RuntimeError(f"service error ({response.status_code}): {detail}")
        return response.json()

    def post(self, path: str, payload: dict) -> dict:
        return self.request("POST", path, payload)

    def get(self, path: str) -> dict:
        return self.request("GET", path)


def _check_out_path(out: str) -> Path:
    path = Path(out)
    if not path.parent.exists():
        raise click.UsageError(f"output directory {path.parent} does not exist")
    return path


def _parse_floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v != ""]


@click.group()
@click.option("--server", default=None, envvar="ROBOPT_SERVER", help="Remote service URL (default: in-process).")
@click.option("--seed", default=None, type=int, envvar="ROBOPT_SEED", help="Global seed fallback.")
@click.option("--log-level", default="WARNING", show_default=True)
@click.pass_context
def main(ctx, server, seed, log_level):
    """Client for the private/robust optimization service."""
    logging.basicConfig(level=getattr(logging, log_level.upper(), logging.WARNING))
    ctx.obj = {"client": ServiceClient(server), "seed": seed}


def _effective_seed(ctx, seed) -> int:
    if seed is not None:
        return seed
    if ctx.obj.get("seed") is not None:
        return ctx.obj["seed"]
    return 0


@main.command()
@click.option("--model", "model_tag", required=True, type=click.Choice(["linear", "glm-logistic", "separable"]))
@click.option("--n", required=True, type=int)
@click.option("--p", required=True, type=int)
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=str, help="CSV output path; a .json sidecar is written next to it.")
@click.option("--theta-star", default=None, help="Comma-separated coefficients (default: all ones).")
@click.option("--cov", default="identity", show_default=True, help="identity | diagonal:v1,v2,.. | rank-m:K | uniform:A")
@click.option("--noise", default="student-t:3", show_default=True, help="none | gaussian:S2 | student-t:NU | truncated:S2,B")
@click.option("--a", type=float, default=None, help="Covariate box half-width for the logistic model.")
@click.pass_context
def synth(ctx, model_tag, n, p, seed, out, theta_star, cov, noise, a):
    """Generate a synthetic dataset and write CSV plus JSON sidecar."""
    path = _check_out_path(out)
    payload = {
        "model": model_tag,
        "n": n,
        "p": p,
        "seed": _effective_seed(ctx, seed),
        "cov": _cov_payload(cov),
        "noise": _noise_payload(noise),
    }
    if theta_star is not None:
        payload["theta_star"] = _parse_floats(theta_star)
    if a is not None:
        payload["a"] = a
    body = ctx.obj["client"].post("/synth", payload)
    path.write_text(body["csv"])
    Path(str(path) + ".json").write_text(json.dumps(body["sidecar"], indent=2) + "\n")
    click.echo(f"wrote {path} and {path}.json")


def _cov_payload(text: str) -> dict:
    kind, _, arg = text.partition(":")
    if kind == "identity":
        return {"kind": "identity"}
    if kind == "diagonal":
        return {"kind": "diagonal", "values": _parse_floats(arg)}
    if kind == "rank-m":
        return {"kind": "rank-m", "m": int(arg)}
    if kind == "uniform":
        return {"kind": "uniform-box", "half_width": float(arg)}
    raise click.UsageError(f"unknown covariance spec {text!r}")


def _noise_payload(text: str) -> dict:
    kind, _, arg = text.partition(":")
    if kind == "none":
        return {"kind": "none"}
    if kind == "gaussian":
        return {"kind": "gaussian", "sigma2": float(arg)}
    if kind == "student-t":
        return {"kind": "student-t", "nu": float(arg)}
    if kind == "truncated":
        sigma2, bound = _parse_floats(arg)
        return {"kind": "truncated-gaussian", "sigma2": sigma2, "bound": bound}
    raise click.UsageError(f"unknown noise spec {text!r}")


@main.command()
@click.option("--variant", required=True, type=click.Choice(["accelerated", "classic", "sgd", "chunked-gd"]))
@click.option("--l2", "--L2", "l2", required=True, type=float)
@click.option("--n", required=True, type=int)
@click.option("--t", "--T", "t", required=True, type=int)
@click.option("--eps", required=True, type=float)
@click.option("--delta", required=True, type=float)
@click.pass_context
def privacy(ctx, variant, l2, n, t, eps, delta):
    """Print noise variance, per-step budget, and regime flags as JSON."""
    body = ctx.obj["client"].post(
        "/privacy", {"variant": variant, "L2": l2, "n": n, "T": t, "epsilon": eps, "delta": delta}
    )
    click.echo(json.dumps(body, indent=2, sort_keys=True))


@main.command()
@click.option("--algo", required=True, type=str)
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True), help="JSON run configuration.")
@click.option("--out", required=True, type=str, help="Trajectory CSV output path.")
@click.pass_context
def run(ctx, algo, data_path, config_path, out):
    """Run one optimizer on a dataset file and write the trajectory CSV.

    The JSON config may carry: T, theta0, theta1, eta, lam, r, tau_u, tau_l,
    seed, epsilon, delta, model {family, gamma, q, L_x, K_y}, constraint
    {kind, radius}, source {kind, ...}, reference_value.
    """
    path = _check_out_path(out)
    dataset = read_dataset_csv(data_path)
    config = json.loads(Path(config_path).read_text())
    payload = {
        "dataset": {
            "X": dataset.X.tolist(),
            "y": dataset.y.tolist(),
            "theta_star": None if dataset.theta_star is None else dataset.theta_star.tolist(),
            "model_tag": dataset.model_tag,
            "seed": dataset.seed,
        },
        "model": config.get("model", {"family": "squared"}),
        "constraint": config.get("constraint", {"kind": "all-space"}),
        "source": config.get("source", {"kind": "exact-mean"}),
        "config": {key: value for key, value in config.items() if key not in ("model", "constraint", "source", "reference_value")}
        | {"algorithm": algo},
        "reference_value": config.get("reference_value"),
    }
    body = ctx.obj["client"].post("/run", payload)
    path.write_text(body["csv"])
    summary = {key: body[key] for key in body if key != "csv"}
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command()
@click.option("--id", "scenario_id", required=True, type=str, help="Scenario id F1..F7.")
@click.option("--scale", type=float, default=None, help="Shrink factor for the n grid (default: per-scenario).")
@click.option("--seeds", default=None, help="Comma-separated seed list.")
@click.option("--out", required=True, type=str)
@click.option("--jobs", type=int, default=1, show_default=True, help="Parallel cell workers.")
@click.pass_context
def scenario(ctx, scenario_id, scale, seeds, out, jobs):
    """Run one benchmark scenario and write its result table CSV."""
    path = _check_out_path(out)
    payload = {"id": scenario_id, "scale": scale, "parallel_width": jobs}
    if seeds:
        payload["seeds"] = [int(s) for s in seeds.split(",") if s != ""]
    body = ctx.obj["client"].post("/scenarios/run", payload)
    path.write_text(body["csv"])
    click.echo(f"wrote {path} ({body['rows']} rows)")


def entrypoint() -> int:
    try:
        main(standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 2
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        return 130
    except Exception as exc:  # runtime failure inside a command
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(entrypoint())
