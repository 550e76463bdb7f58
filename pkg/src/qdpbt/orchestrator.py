"""The three runners behind one loop: init, then
{population_update; train_population; repertoire_update; log} under a shared
environment-step budget.

Runner differences are data, not code paths: the quality-diversity loop with
a population (pbt-me), the same loop with no population (map-elites), and the
population loop with no variation, whose per-iteration evaluations fill a
passive archive and are left off the budget (pbt).

Randomness comes from one master seed through a fixed catalog of child
streams; every slot additionally owns a stream that is consumed in the same
order whether its training runs stacked with the whole population or alone,
so parallel and sequential execution produce identical bytes.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qdpbt.agents import (
    Agent,
    TrainBlock,
    agent_from_block,
    block_from_agents,
    draw_training_batch,
    evaluate_stacked,
    init_agent,
    make_nets,
    merge_block_row,
    slice_block,
    train_step_block,
    write_agent_into_block,
)
from qdpbt.buffers import StackedReplayBuffer
from qdpbt.config import RunSettings, band_sizes
from qdpbt.envs import make_env
from qdpbt.hyper import HyperSchema, schema_for
from qdpbt.nets import forward_stacked
from qdpbt.repertoire import Repertoire
from qdpbt.snapshot import save_snapshot
from qdpbt.tessellation import build_cvt, save_centroids
from qdpbt.variation import IsolineParams, vary_agents

log = logging.getLogger(__name__)

METRICS_COLUMNS = ("budget_steps", "max_fitness", "coverage", "qd_score", "wall_seconds")

# child indices of the master seed, in spawn order
_STREAMS = ("cvt", "net_init", "hyper_init", "slots", "variation", "pop_update",
            "init_offspring", "eval")


@dataclass
class MetricsRow:
    budget_steps: int
    max_fitness: float
    coverage: float
    qd_score: float
    wall_seconds: float


@dataclass
class Population:
    block: TrainBlock
    stack: StackedReplayBuffer
    rngs: list[np.random.Generator]
    last_fitness: np.ndarray  # (P,) float64
    last_descriptor: np.ndarray  # (P, bd_dim) float64


@dataclass
class RunResult:
    settings: RunSettings
    metrics: list[MetricsRow]
    repertoire: Repertoire
    budget_consumed: int
    env_steps_total: int  # includes uncharged passive evaluations
    iterations: int
    wall_seconds: float


def _streams(seed: int) -> dict[str, np.random.SeedSequence]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return dict(zip(_STREAMS, children))


def _explore_stacked(block: TrainBlock, states: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Exploration actions for a block, states (pop, state_dim), eps (pop, action_dim)."""
    nets = block.nets
    x = states.astype(np.float32)
    out = forward_stacked(nets.actor, block.params["actor"], x[:, None, :])[:, 0, :]
    if nets.algo == "td3":
        noisy = out + block.h32["exploration_noise"][:, None] * eps
        return np.clip(noisy, -1.0, 1.0).astype(np.float32)
    ad = nets.action_dim
    log_std = np.clip(out[:, ad:], -20.0, 2.0)
    return np.tanh(out[:, :ad] + np.exp(log_std) * eps)


def _uniform_batch_size(block: TrainBlock) -> int:
    sizes = {int(h["batch_size"]) for h in block.h_dicts}
    if len(sizes) != 1:
        raise ValueError(f"stacked training needs one shared batch_size, got {sorted(sizes)}")
    return sizes.pop()


def _advance_group(block: TrainBlock, stack: StackedReplayBuffer, rngs, env, steps: int) -> None:
    """steps (collect + train) iterations for every slot in the block.

    Per slot and step the stream order is pinned: exploration noise, then
    batch indices, then training noise. Episodes restart fresh at phase
    entry; a trailing partial episode simply stays in the buffer.
    """
    group = block.pop
    batch_size = _uniform_batch_size(block)
    action_dim = env.spec.action_dim
    horizon = env.spec.episode_length
    states = env.reset_batch(group)
    t_in_ep = 0
    for _ in range(steps):
        eps = np.stack([rng.standard_normal(action_dim) for rng in rngs]).astype(np.float32)
        actions = _explore_stacked(block, states, eps)
        next_states, rewards = env.step_batch(states, actions)
        t_in_ep += 1
        done = t_in_ep >= horizon
        stack.append_batch(states, actions, rewards, next_states,
                           np.full(group, 1.0 if done else 0.0))
        states = next_states
        if done:
            states = env.reset_batch(group)
            t_in_ep = 0
        if stack.size >= batch_size:
            data, draws = draw_training_batch(block.nets.algo, stack, rngs, batch_size, action_dim)
            train_step_block(block, data, draws)


def train_population(pop: Population, env, steps_per_agent: int, parallel: bool) -> int:
    """All slots advance steps_per_agent env steps with 1:1 collect/train.

    Returns the consumed env-step count P * steps_per_agent. parallel picks
    stacked execution over the whole population; otherwise slots run one by
    one on the same per-slot streams, to identical results.
    """
    if parallel:
        _advance_group(pop.block, pop.stack, pop.rngs, env, steps_per_agent)
    else:
        view = None
        for i in range(pop.block.pop):
            row = slice_block(pop.block, i)
            view = pop.stack.row_view(i)
            _advance_group(row, view, [pop.rngs[i]], env, steps_per_agent)
            merge_block_row(pop.block, i, row)
        if view is not None:
            pop.stack.ptr = view.ptr
            pop.stack.size = view.size
    return pop.block.pop * steps_per_agent


def population_update(
    pop: Population,
    rep: Repertoire,
    settings: RunSettings,
    schema: HyperSchema,
    rng: np.random.Generator,
) -> dict:
    """Truncation replacement from the top band plus repertoire injection.

    Slots are ranked by last fitness (descending, ties by slot index). The
    bottom band copies (theta, phi) from uniformly drawn top-band donors and
    resamples h; injected middle-band slots adopt complete repertoire elites,
    h included unless resample_h_on_injection. Per replaced slot the stream
    order is source draw then h draw. Replaced slots keep their buffers and
    reset optimizer state and step counters.
    """
    size = pop.block.pop
    num_bottom, num_top, num_inject = band_sizes(settings)
    if num_bottom == 0 and num_inject == 0:
        return {"truncated": [], "injected": []}
    ranked = sorted(range(size), key=lambda i: (-pop.last_fitness[i], i))
    top = ranked[:num_top]
    bottom = ranked[size - num_bottom :] if num_bottom else []
    middle = ranked[num_top : size - num_bottom]

    for slot in bottom:
        donor = top[rng.integers(0, num_top)]
        replacement = agent_from_block(pop.block, donor)
        replacement.h = schema.sample(rng)
        write_agent_into_block(pop.block, slot, replacement)

    injected = []
    if num_inject:
        chosen = rng.choice(len(middle), size=num_inject, replace=False)
        injected = sorted(middle[j] for j in chosen)
        for slot in injected:
            elite = rep.sample(1, rng)[0]
            if settings.resample_h_on_injection:
                elite.h = schema.sample(rng)
            write_agent_into_block(pop.block, slot, elite)
    return {"truncated": list(bottom), "injected": injected}


class _BudgetClock:
    """Charged-step counter plus a total that includes uncharged evaluations."""

    def __init__(self):
        self.charged = 0
        self.total = 0

    def spend(self, steps: int, charge: bool) -> None:
        self.total += steps
        if charge:
            self.charged += steps


def _evaluate_population(pop: Population, rep: Repertoire, env, clock, charge: bool) -> None:
    """Evaluate every slot, then insert copies in index order.

    The rollouts are batched; they touch neither the archive nor any rng, so
    running them up front leaves the insertion sequence unchanged.
    """
    horizon = env.spec.episode_length
    agents = [agent_from_block(pop.block, i) for i in range(pop.block.pop)]
    results = evaluate_stacked(agents, env)
    for i, (agent, res) in enumerate(zip(agents, results)):
        clock.spend(horizon, charge)
        pop.last_fitness[i] = res.fitness
        pop.last_descriptor[i] = res.descriptor
        rep.try_insert(agent, res.fitness, res.descriptor, clock.charged)


def _offspring_batch(agents: list[Agent], rep: Repertoire, env, clock) -> None:
    results = evaluate_stacked(agents, env)
    for child, res in zip(agents, results):
        clock.spend(env.spec.episode_length, charge=True)
        rep.try_insert(child, res.fitness, res.descriptor, clock.charged)


def _sample_offspring(
    rep: Repertoire, count: int, iso: IsolineParams, rng: np.random.Generator
) -> list[Agent]:
    parents = rep.sample(2 * count, rng)
    pairs = [(parents[2 * j], parents[2 * j + 1]) for j in range(count)]
    return vary_agents(pairs, iso, rng)


def run(settings: RunSettings, out_dir: str | Path | None = None, env=None,
        on_progress=None) -> RunResult:
    """Execute one configured run; see the module docstring for the loop.

    on_progress, if given, is called as on_progress(row, iterations) right
    after each metrics row is logged.
    """
    started = time.perf_counter()
    if env is None:
        env = make_env(settings.env)
    spec = env.spec
    streams = _streams(settings.seed)
    schema = schema_for(settings.algo).with_overrides(settings.hyper_overrides)
    nets = make_nets(settings.algo, spec.state_dim, spec.action_dim, settings.hidden)
    iso = IsolineParams(settings.sigma_iso, settings.sigma_line)
    charge_evals = settings.runner != "pbt"

    out = Path(out_dir) if out_dir else (Path(settings.out_dir) if settings.out_dir else None)
    if out:
        out.mkdir(parents=True, exist_ok=True)

    centroids = build_cvt(
        settings.num_cells,
        settings.cvt_init_points,
        np.asarray(spec.bd_bounds, dtype=np.float64),
        np.random.default_rng(streams["cvt"]),
    )
    if out:
        save_centroids(centroids, out / "centroids.txt")
    rep = Repertoire(centroids, spec.fitness_offset)
    clock = _BudgetClock()

    metrics_rows: list[MetricsRow] = []
    metrics_file = open(out / "metrics.csv", "w", newline="") if out else None
    writer = csv.writer(metrics_file) if metrics_file else None
    if writer:
        writer.writerow(METRICS_COLUMNS)

    def log_metrics():
        m = rep.metrics()
        row = MetricsRow(clock.charged, m.max_fitness, m.coverage, m.qd_score,
                         time.perf_counter() - started)
        metrics_rows.append(row)
        if writer:
            writer.writerow([row.budget_steps, repr(row.max_fitness), repr(row.coverage),
                             repr(row.qd_score), f"{row.wall_seconds:.3f}"])
            metrics_file.flush()
        if on_progress:
            on_progress(row, iterations)

    def snapshot_meta():
        return {
            "env": settings.env,
            "algo": settings.algo,
            "hidden": list(settings.hidden),
            "state_dim": spec.state_dim,
            "action_dim": spec.action_dim,
            "bd_bounds": [list(map(float, b)) for b in spec.bd_bounds],
            "num_cells": settings.num_cells,
            "runner": settings.runner,
            "seed": settings.seed,
        }

    # init: population (if any) evaluated and inserted, plus one offspring batch
    iterations = 0
    pop = None
    size = settings.population_size
    if size > 0:
        net_rng = np.random.default_rng(streams["net_init"])
        hyper_rng = np.random.default_rng(streams["hyper_init"])
        agents = []
        for _ in range(size):
            h = schema.sample(hyper_rng)
            agents.append(init_agent(nets, h, net_rng))
        pop = Population(
            block=block_from_agents(agents),
            stack=StackedReplayBuffer(size, settings.buffer_capacity, spec.state_dim,
                                      spec.action_dim),
            rngs=[np.random.default_rng(s) for s in streams["slots"].spawn(size)],
            last_fitness=np.zeros(size),
            last_descriptor=np.zeros((size, len(spec.bd_bounds))),
        )
        _evaluate_population(pop, rep, env, clock, charge_evals)

    if settings.offspring > 0:
        io_rng = np.random.default_rng(streams["init_offspring"])
        if rep.cells:
            children = _sample_offspring(rep, settings.offspring, iso, io_rng)
        else:
            # nothing to vary yet: the init batch is fresh random agents
            children = []
            for _ in range(settings.offspring):
                h = schema.sample(io_rng)
                children.append(init_agent(nets, h, io_rng))
        _offspring_batch(children, rep, env, clock)

    log_metrics()

    var_rng = np.random.default_rng(streams["variation"])
    update_rng = np.random.default_rng(streams["pop_update"])

    iteration_cost = size * settings.steps_per_agent
    if charge_evals:
        iteration_cost += (size + settings.offspring) * spec.episode_length

    while iteration_cost > 0 and clock.charged + iteration_cost <= settings.total_budget:
        if pop is not None:
            population_update(pop, rep, settings, schema, update_rng)
            spent = train_population(pop, env, settings.steps_per_agent,
                                     settings.parallel_training)
            clock.spend(spent, charge=True)
            _evaluate_population(pop, rep, env, clock, charge_evals)
        if settings.offspring > 0:
            children = _sample_offspring(rep, settings.offspring, iso, var_rng)
            _offspring_batch(children, rep, env, clock)
        iterations += 1
        log_metrics()
        if out and settings.checkpoint_every and iterations % settings.checkpoint_every == 0:
            save_snapshot(out / f"snapshot_{clock.charged:012d}.json", rep, clock.charged,
                          snapshot_meta())

    if out:
        save_snapshot(out / "snapshot_final.json", rep, clock.charged, snapshot_meta())
    if metrics_file:
        metrics_file.close()
    if rep.nonfinite_rejections:
        log.warning("run rejected %d non-finite candidates", rep.nonfinite_rejections)
    return RunResult(
        settings=settings,
        metrics=metrics_rows,
        repertoire=rep,
        budget_consumed=clock.charged,
        env_steps_total=clock.total,
        iterations=iterations,
        wall_seconds=time.perf_counter() - started,
    )
