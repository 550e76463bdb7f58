"""HTTP surface: submit runs, poll their progress, replay archived agents,
and export heatmap tables.

Runs execute on background threads inside the serving process; everything
else is a stateless operation on snapshot files. The CLI mounts this app
in-process by default, so no separate server is needed for local work.
"""
from __future__ import annotations

import threading
import traceback
import uuid
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from qdpbt.agents import evaluate
from qdpbt.config import RunSettings, emit_ini, parse_ini, preset_settings, validate
from qdpbt.envs import make_env
from qdpbt.heatmaps import export_heatmaps
from qdpbt.orchestrator import MetricsRow, run
from qdpbt.snapshot import load_snapshot


class RunRequest(BaseModel):
    config_text: str | None = None  # INI content; may name a preset in [run]
    preset: str | None = None  # used instead of config_text
    runner: str | None = None
    overrides: dict[str, Any] = Field(default_factory=dict)  # RunSettings fields


class RunStarted(BaseModel):
    job_id: str
    out_dir: str
    config_text: str  # the fully resolved configuration


class JobStatus(BaseModel):
    job_id: str
    state: str  # running | done | error
    runner: str
    out_dir: str
    total_budget: int
    iterations: int = 0
    budget_consumed: int = 0
    max_fitness: float | None = None
    coverage: float | None = None
    qd_score: float | None = None
    error: str | None = None


class EvalRequest(BaseModel):
    snapshot: str
    cell: int


class EvalResponse(BaseModel):
    cell: int
    stored_fitness: float
    replay_fitness: float
    stored_descriptor: list[float]
    replay_descriptor: list[float]
    exact: bool


class HeatmapRequest(BaseModel):
    snapshot: str
    out_dir: str | None = None  # default: next to the snapshot
    force: bool = False


class HeatmapResponse(BaseModel):
    files: list[str]


class _Job:
    def __init__(self, job_id: str, settings: RunSettings):
        self.job_id = job_id
        self.settings = settings
        self.state = "running"
        self.iterations = 0
        self.row: MetricsRow | None = None
        self.error: str | None = None

    def on_progress(self, row: MetricsRow, iterations: int) -> None:
        self.row = row
        self.iterations = iterations

    def status(self) -> JobStatus:
        row = self.row
        return JobStatus(
            job_id=self.job_id,
            state=self.state,
            runner=self.settings.runner,
            out_dir=self.settings.out_dir or "",
            total_budget=self.settings.total_budget,
            iterations=self.iterations,
            budget_consumed=row.budget_steps if row else 0,
            max_fitness=None if row is None or np.isnan(row.max_fitness) else row.max_fitness,
            coverage=row.coverage if row else None,
            qd_score=row.qd_score if row else None,
            error=self.error,
        )


def resolve_settings(req: RunRequest) -> RunSettings:
    if req.config_text and req.preset:
        raise ValueError("give either config_text or a preset name, not both")
    if req.config_text:
        settings = parse_ini(req.config_text)
        if req.runner and req.runner != settings.runner:
            raise ValueError(
                f"config resolves runner={settings.runner!r} but the request says {req.runner!r}"
            )
    else:
        settings = preset_settings(req.preset or "desk", req.runner or "pbt-me")
    overrides = dict(req.overrides)
    if "hidden" in overrides:
        overrides["hidden"] = tuple(int(s) for s in overrides["hidden"])
    if overrides:
        settings = replace(settings, **overrides)
    return validate(settings)


def claim_out_dir(settings: RunSettings) -> RunSettings:
    """Pick a fresh output directory, suffixing rather than overwriting."""
    base = settings.out_dir or (
        f"runs/{settings.runner}-{settings.env}-{settings.algo}-seed{settings.seed}"
    )
    path = Path(base)
    candidate, n = path, 1
    while candidate.exists() and any(candidate.iterdir()):
        n += 1
        candidate = path.with_name(f"{path.name}-{n}")
    candidate.mkdir(parents=True, exist_ok=True)
    return replace(settings, out_dir=str(candidate))


def _one_line(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def create_app() -> FastAPI:
    app = FastAPI(title="qdpbt")
    jobs: dict[str, _Job] = {}

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    @app.post("/runs", response_model=RunStarted)
    def start_run(req: RunRequest):
        try:
            settings = claim_out_dir(resolve_settings(req))
        except (ValueError, TypeError) as e:
            raise HTTPException(422, _one_line(e))
        resolved = emit_ini(settings)
        Path(settings.out_dir, "config_resolved.ini").write_text(resolved)
        job = _Job(uuid.uuid4().hex[:12], settings)
        jobs[job.job_id] = job

        def work():
            try:
                run(settings, on_progress=job.on_progress)
                job.state = "done"
            except Exception as e:
                log_tb = traceback.format_exc()
                job.error = _one_line(e)
                job.state = "error"
                print(log_tb, flush=True)

        threading.Thread(target=work, daemon=True, name=f"run-{job.job_id}").start()
        return RunStarted(job_id=job.job_id, out_dir=settings.out_dir, config_text=resolved)

    @app.get("/runs/{job_id}", response_model=JobStatus)
    def run_status(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"no such job {job_id!r}")
        return job.status()

    @app.get("/runs", response_model=list[JobStatus])
    def list_runs():
        return [job.status() for job in jobs.values()]

    @app.post("/eval", response_model=EvalResponse)
    def eval_cell(req: EvalRequest):
        try:
            snap = load_snapshot(req.snapshot)
        except FileNotFoundError:
            raise HTTPException(404, f"snapshot not found: {req.snapshot}")
        except (ValueError, KeyError) as e:
            raise HTTPException(400, _one_line(e))
        match = [(c, a) for c, a in snap.agents() if int(c["index"]) == req.cell]
        if not match:
            raise HTTPException(404, f"cell {req.cell} is not occupied in this snapshot")
        cell, agent = match[0]
        env = make_env(snap.meta["env"])
        res = evaluate(agent, env)
        stored_desc = [float(x) for x in cell["descriptor"]]
        replay_desc = [float(x) for x in res.descriptor]
        exact = res.fitness == float(cell["fitness"]) and replay_desc == stored_desc
        return EvalResponse(
            cell=req.cell,
            stored_fitness=float(cell["fitness"]),
            replay_fitness=res.fitness,
            stored_descriptor=stored_desc,
            replay_descriptor=replay_desc,
            exact=exact,
        )

    @app.post("/export-heatmap", response_model=HeatmapResponse)
    def export(req: HeatmapRequest):
        try:
            snap = load_snapshot(req.snapshot)
        except FileNotFoundError:
            raise HTTPException(404, f"snapshot not found: {req.snapshot}")
        except (ValueError, KeyError) as e:
            raise HTTPException(400, _one_line(e))
        out_dir = req.out_dir or str(Path(req.snapshot).parent)
        try:
            paths = export_heatmaps(snap, out_dir, force=req.force)
        except FileExistsError as e:
            raise HTTPException(409, _one_line(e))
        except ValueError as e:
            raise HTTPException(400, _one_line(e))
        return HeatmapResponse(files=[str(p) for p in paths])

    return app
