"""Command-line client for the run service.

Commands talk HTTP to the service app. By default the app is mounted
in-process, so `qdpbt run` works with nothing else running; --server points
the same commands at a remote instance instead.
"""
from __future__ import annotations

import asyncio
import time
from pathlib import Path

import click
import httpx

from qdpbt.config import RUNNERS
from qdpbt.service import create_app

_SERVER_OPT = click.option(
    "--server", default=None, metavar="URL",
    help="Remote service URL; default mounts the service in-process.",
)


class ServiceClient:
    def __init__(self, server: str | None):
        self.server = server
        self.app = None if server else create_app()

    def call(self, method: str, path: str, payload: dict | None = None) -> dict | list:
        if self.server:
            with httpx.Client(base_url=self.server, timeout=60.0) as c:
                resp = c.request(method, path, json=payload)
        else:
            resp = self._in_process(method, path, payload)
        if resp.status_code >= 400:
            raise click.ClickException(_diagnostic(resp))
        return resp.json()

    def _in_process(self, method: str, path: str, payload: dict | None):
        async def go():
            transport = httpx.ASGITransport(app=self.app)
            async with httpx.AsyncClient(transport=transport, base_url="http://qdpbt") as c:
                return await c.request(method, path, json=payload)

        return asyncio.run(go())


def _diagnostic(resp) -> str:
    try:
        detail = resp.json().get("detail")
    except ValueError:
        detail = resp.text
    if isinstance(detail, list):  # pydantic validation report
        first = detail[0]
        loc = ".".join(str(p) for p in first.get("loc", []))
        detail = f"{loc}: {first.get('msg', 'invalid request')}"
    return f"{detail} (http {resp.status_code})"


@click.group()
def main():
    """Quality-diversity archives of trained agents: runs, exports, replay."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host: str, port: int):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)


@main.command(name="run")
@click.argument("config", required=False,
                type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--preset", default=None, help="Named preset instead of a config file.")
@click.option("--runner", default=None, type=click.Choice(RUNNERS))
@click.option("--env", "env_name", default=None, help="Environment name.")
@click.option("--algo", default=None, help="Training algorithm.")
@click.option("--seed", default=None, type=int)
@click.option("--budget", default=None, type=float, help="Total env-step budget.")
@click.option("--out", "out_dir", default=None, help="Output directory.")
@click.option("--checkpoint-every", default=None, type=int,
              help="Snapshot every N iterations (0 = final only).")
@click.option("--sequential", is_flag=True, help="Train slots one at a time.")
@_SERVER_OPT
def run_cmd(config, preset, runner, env_name, algo, seed, budget, out_dir,
            checkpoint_every, sequential, server):
    """Execute a configured run and stream its progress."""
    overrides: dict = {}
    if env_name is not None:
        overrides["env"] = env_name
    if algo is not None:
        overrides["algo"] = algo
    if seed is not None:
        overrides["seed"] = seed
    if budget is not None:
        if budget != int(budget) or budget < 0:
            raise click.ClickException(f"--budget must be a non-negative integer, got {budget}")
        overrides["total_budget"] = int(budget)
    if out_dir is not None:
        overrides["out_dir"] = out_dir
    if checkpoint_every is not None:
        overrides["checkpoint_every"] = checkpoint_every
    if sequential:
        overrides["parallel_training"] = False

    payload = {
        "config_text": config.read_text() if config else None,
        "preset": preset,
        "runner": runner,
        "overrides": overrides,
    }
    client = ServiceClient(server)
    started = client.call("POST", "/runs", payload)
    click.echo(f"run {started['job_id']} writing to {started['out_dir']}")

    poll = 0.1 if server is None else 0.5
    seen = -1
    while True:
        status = client.call("GET", f"/runs/{started['job_id']}")
        if status["iterations"] > seen and status["coverage"] is not None:
            seen = status["iterations"]
            fit = status["max_fitness"]
            click.echo(
                f"iter {status['iterations']:4d}  "
                f"budget {status['budget_consumed']}/{status['total_budget']}  "
                f"max_fitness {fit if fit is not None else 'nan'}  "
                f"coverage {status['coverage']:.4f}  qd {status['qd_score']:.3f}"
            )
        if status["state"] == "done":
            click.echo(f"done: metrics and snapshots in {status['out_dir']}")
            return
        if status["state"] == "error":
            raise click.ClickException(status["error"] or "run failed")
        time.sleep(poll)


@main.command(name="export-heatmap")
@click.argument("snapshot", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "out_dir", default=None, help="Directory for the tables.")
@click.option("--force", is_flag=True, help="Overwrite existing tables.")
@_SERVER_OPT
def export_heatmap(snapshot: Path, out_dir, force, server):
    """Write one centroid->value table per archived quantity."""
    client = ServiceClient(server)
    payload = {"snapshot": str(snapshot), "out_dir": out_dir, "force": force}
    result = client.call("POST", "/export-heatmap", payload)
    for f in result["files"]:
        click.echo(f)


@main.command(name="eval")
@click.argument("snapshot", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--cell", required=True, type=int, help="Occupied cell index to replay.")
@_SERVER_OPT
def eval_cmd(snapshot: Path, cell: int, server):
    """Re-roll one archived agent and check it against its stored record."""
    client = ServiceClient(server)
    result = client.call("POST", "/eval", {"snapshot": str(snapshot), "cell": cell})
    click.echo(f"cell {result['cell']}: fitness {result['replay_fitness']!r} "
               f"descriptor {result['replay_descriptor']}")
    if not result["exact"]:
        raise click.ClickException(
            f"replay disagrees with the stored record: fitness {result['replay_fitness']!r} "
            f"vs {result['stored_fitness']!r}, descriptor {result['replay_descriptor']} "
            f"vs {result['stored_descriptor']}"
        )
    click.echo("matches the stored record exactly")


if __name__ == "__main__":
    main()
