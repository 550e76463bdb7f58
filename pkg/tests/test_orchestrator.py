import csv
import re
from dataclasses import replace

import numpy as np
import pytest

from qdpbt.agents import agent_from_block, block_from_agents, init_agent, make_nets
from qdpbt.buffers import StackedReplayBuffer
from qdpbt.config import preset_settings
from qdpbt.envs import make_env
from qdpbt.hyper import schema_for
from qdpbt.orchestrator import (
    METRICS_COLUMNS,
    Population,
    population_update,
    run,
    train_population,
)
from qdpbt.repertoire import Repertoire
from qdpbt.snapshot import load_snapshot
from qdpbt.tessellation import build_cvt


class CountingEnv:
    """Forwards to a real env while counting every simulated step."""

    def __init__(self, inner):
        self.inner = inner
        self.steps = 0

    @property
    def spec(self):
        return self.inner.spec

    def reset(self, rng=None):
        return self.inner.reset(rng)

    def reset_batch(self, count):
        return self.inner.reset_batch(count)

    def step(self, state, action):
        self.steps += 1
        return self.inner.step(state, action)

    def step_batch(self, states, actions):
        self.steps += states.shape[0]
        return self.inner.step_batch(states, actions)

    def descriptor_from_state(self, state):
        return self.inner.descriptor_from_state(state)


def tiny(runner, **over):
    base = dict(num_cells=16, cvt_init_points=200, hidden=(8, 8), seed=5)
    if runner == "pbt-me":
        base.update(population_size=4, steps_per_agent=30, offspring=4, total_budget=3560,
                    hyper_overrides={"batch_size": {"value": 8}})
    elif runner == "pbt":
        base.update(population_size=4, steps_per_agent=30, total_budget=360,
                    hyper_overrides={"batch_size": {"value": 8}})
    else:
        base.update(offspring=6, total_budget=1800)
    base.update(over)
    return preset_settings("desk", runner, **base)


def test_budget_accounting_pbt_me():
    env = CountingEnv(make_env("point-maze-trap"))
    res = run(tiny("pbt-me"), env=env)
    # init (4+4)*100 = 800, per iteration 4*30 + (4+4)*100 = 920
    assert res.iterations == 3
    assert res.budget_consumed == 800 + 3 * 920 == 3560
    assert res.env_steps_total == res.budget_consumed == env.steps
    assert [r.budget_steps for r in res.metrics] == [800, 1720, 2640, 3560]


def test_budget_accounting_pbt_excludes_evaluations():
    env = CountingEnv(make_env("point-maze-trap"))
    res = run(tiny("pbt"), env=env)
    # only the 4*30 training steps per iteration count against the budget
    assert res.iterations == 3
    assert res.budget_consumed == 3 * 120 == 360
    # 4 evaluation rounds (init + one per iteration) of 4 agents x 100 steps
    assert res.env_steps_total == 360 + 4 * 400 == env.steps
    assert [r.budget_steps for r in res.metrics] == [0, 120, 240, 360]
    # the passive archive still fills up from those evaluations
    assert res.metrics[-1].coverage > 0.0


def test_budget_accounting_map_elites():
    env = CountingEnv(make_env("point-maze-trap"))
    res = run(tiny("map-elites"), env=env)
    assert res.iterations == 2
    assert res.budget_consumed == 600 + 2 * 600 == 1800
    assert res.env_steps_total == env.steps == 1800
    assert [r.budget_steps for r in res.metrics] == [600, 1200, 1800]


def test_budget_never_exceeded_on_partial_iteration():
    # room for init plus 2.5 iterations: the half iteration must not start
    res = run(tiny("pbt-me", total_budget=800 + 2 * 920 + 460))
    assert res.iterations == 2
    assert res.budget_consumed == 800 + 2 * 920 <= res.settings.total_budget


def test_zero_budget_runs_init_only():
    res = run(tiny("pbt-me", total_budget=0))
    assert res.iterations == 0
    assert len(res.metrics) == 1
    assert res.metrics[0].budget_steps == 800  # the init batch is unconditional
    assert len(res.repertoire.cells) > 0

    res = run(tiny("pbt", total_budget=0))
    assert res.iterations == 0 and res.metrics[0].budget_steps == 0
    assert len(res.repertoire.cells) > 0


def test_metrics_are_monotone():
    res = run(tiny("pbt-me"))
    cov = [r.coverage for r in res.metrics]
    qd = [r.qd_score for r in res.metrics]
    fit = [r.max_fitness for r in res.metrics]
    assert cov == sorted(cov)
    assert qd == sorted(qd)
    assert fit == sorted(fit)


def _read_rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_metrics_csv_format_and_roundtrip(tmp_path):
    res = run(tiny("pbt-me", out_dir=str(tmp_path / "out")))
    rows = _read_rows(tmp_path / "out" / "metrics.csv")
    assert rows[0] == list(METRICS_COLUMNS)
    assert len(rows) == 1 + len(res.metrics)
    for text, row in zip(rows[1:], res.metrics):
        assert int(text[0]) == row.budget_steps
        # full-precision floats: parsing the text recovers the exact value
        assert float(text[1]) == row.max_fitness
        assert float(text[2]) == row.coverage
        assert float(text[3]) == row.qd_score
        assert re.fullmatch(r"\d+\.\d{3}", text[4])


def test_same_seed_same_bytes(tmp_path):
    s = tiny("pbt-me")
    run(s, out_dir=tmp_path / "a")
    run(s, out_dir=tmp_path / "b")
    for name in ("centroids.txt", "snapshot_final.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows_a = _read_rows(tmp_path / "a" / "metrics.csv")
    rows_b = _read_rows(tmp_path / "b" / "metrics.csv")
    assert [r[:4] for r in rows_a] == [r[:4] for r in rows_b]  # all but wall time


def test_parallel_and_sequential_runs_match(tmp_path):
    s = tiny("pbt-me")
    run(s, out_dir=tmp_path / "par")
    run(replace(s, parallel_training=False), out_dir=tmp_path / "seq")
    a = (tmp_path / "par" / "snapshot_final.json").read_bytes()
    b = (tmp_path / "seq" / "snapshot_final.json").read_bytes()
    assert a == b
    rows_a = _read_rows(tmp_path / "par" / "metrics.csv")
    rows_b = _read_rows(tmp_path / "seq" / "metrics.csv")
    assert [r[:4] for r in rows_a] == [r[:4] for r in rows_b]


def test_checkpoint_schedule(tmp_path):
    out = tmp_path / "out"
    run(tiny("pbt-me", checkpoint_every=2, out_dir=str(out)))
    names = sorted(p.name for p in out.glob("snapshot_*.json"))
    # 3 iterations with a checkpoint every 2: only iteration 2 (charged 2640)
    assert names == ["snapshot_000000002640.json", "snapshot_final.json"]
    snap = load_snapshot(out / "snapshot_000000002640.json")
    assert snap.budget_consumed == 2640
    final = load_snapshot(out / "snapshot_final.json")
    assert final.budget_consumed == 3560
    assert final.meta["runner"] == "pbt-me"
    assert final.meta["seed"] == 5


# --- population phase contracts -------------------------------------------


def _fresh_population(env, schema, size, seed, hidden=(4, 4), capacity=300):
    nets = make_nets("td3", env.spec.state_dim, env.spec.action_dim, hidden)
    net_rng = np.random.default_rng(seed)
    hyper_rng = np.random.default_rng(seed + 1)
    agents = [init_agent(nets, schema.sample(hyper_rng), net_rng) for _ in range(size)]
    slots = np.random.SeedSequence(seed + 2).spawn(size)
    return Population(
        block=block_from_agents(agents),
        stack=StackedReplayBuffer(size, capacity, env.spec.state_dim, env.spec.action_dim),
        rngs=[np.random.default_rng(s) for s in slots],
        last_fitness=np.zeros(size),
        last_descriptor=np.zeros((size, 2)),
    )


def _snapshot_block(block):
    return {
        "params": {k: v.copy() for k, v in block.params.items()},
        "m": {k: block.adam[k].m.copy() for k in block.adam},
        "v": {k: block.adam[k].v.copy() for k in block.adam},
        "step": {k: block.adam[k].step.copy() for k in block.adam},
        "calls": block.calls.copy(),
        "h": [dict(h) for h in block.h_dicts],
    }


def _seeded_repertoire(env, schema, nets, count=3, seed=77):
    cs = build_cvt(16, 200, env.spec.bd_bounds, seed)
    rep = Repertoire(cs, env.spec.fitness_offset)
    rng = np.random.default_rng(seed)
    placed = 0
    while placed < count:
        agent = init_agent(nets, schema.sample(rng), rng)
        desc = rng.uniform(0.0, 1.0, size=2)
        outcome, _ = rep.try_insert(agent, float(placed + 1), desc, steps=0)
        if outcome.name == "INSERTED_EMPTY":
            placed += 1
    return rep


def test_population_update_replays_documented_draws():
    env = make_env("point-maze-trap")
    schema = schema_for("td3").with_overrides({"batch_size": {"value": 8}})
    pop = _fresh_population(env, schema, size=8, seed=21)
    nets = pop.block.nets
    rep = _seeded_repertoire(env, schema, nets)
    pop.last_fitness = np.array([3.0, 1.0, 4.0, 0.5, 2.0, 2.0, 5.0, 0.1])
    # make optimizer state and buffers visibly non-fresh
    for st in pop.block.adam.values():
        st.m += 1.0
        st.step += 4
    pop.block.calls += 7
    st0 = env.reset_batch(8)
    pop.stack.append_batch(st0, np.ones((8, 2), np.float32), np.arange(8), st0, np.zeros(8))
    before = _snapshot_block(pop.block)
    stack_before = {k: getattr(pop.stack, k).copy()
                    for k in ("states", "actions", "rewards", "next_states", "dones")}

    settings = tiny("pbt-me", population_size=8, worst_frac=0.25, donor_frac=0.25,
                    inject_frac=0.25)
    rng = np.random.default_rng(99)
    out = population_update(pop, rep, settings, schema, rng)

    # ranking by fitness desc, index asc: [6, 2, 0, 4, 5, 1, 3, 7]
    top, middle = [6, 2], [0, 4, 5, 1]
    assert out["truncated"] == [3, 7]

    twin = np.random.default_rng(99)
    expected = {}
    for slot in (3, 7):
        donor = top[twin.integers(0, 2)]
        expected[slot] = (donor, schema.sample(twin))
    chosen = twin.choice(4, size=2, replace=False)
    assert out["injected"] == sorted(middle[j] for j in chosen)
    occupied = rep.occupied_indices()
    for slot in out["injected"]:
        idx = twin.integers(0, len(occupied), size=1)[0]
        expected[slot] = (("elite", occupied[idx]), None)

    touched = set(expected)
    for name, arr in pop.block.params.items():
        for i in range(8):
            if i in touched:
                src, _ = expected[i]
                if isinstance(src, tuple):
                    elite_block = block_from_agents([rep.cells[src[1]].agent])
                    assert np.array_equal(arr[i], elite_block.params[name][0])
                else:
                    assert np.array_equal(arr[i], before["params"][name][src])
            else:
                assert np.array_equal(arr[i], before["params"][name][i])
    for i in range(8):
        if i in touched:
            src, h = expected[i]
            if h is None:  # injected: adopts the stored elite hyperparameters
                assert pop.block.h_dicts[i] == rep.cells[src[1]].agent.h
            else:
                assert pop.block.h_dicts[i] == h
            assert pop.block.calls[i] == 0
            for st in pop.block.adam.values():
                assert not st.m[i].any() and not st.v[i].any() and st.step[i] == 0
        else:
            assert pop.block.h_dicts[i] == before["h"][i]
            assert pop.block.calls[i] == before["calls"][i]
    # replaced slots keep their replay buffers
    for k, v in stack_before.items():
        assert np.array_equal(getattr(pop.stack, k), v)


def test_population_update_can_resample_injected_hyperparams():
    env = make_env("point-maze-trap")
    schema = schema_for("td3").with_overrides({"batch_size": {"value": 8}})
    pop = _fresh_population(env, schema, size=8, seed=22)
    rep = _seeded_repertoire(env, schema, pop.block.nets)
    pop.last_fitness = np.arange(8.0)
    settings = tiny("pbt-me", population_size=8, worst_frac=0.25, donor_frac=0.25,
                    inject_frac=0.25, resample_h_on_injection=True)
    rng = np.random.default_rng(7)
    out = population_update(pop, rep, settings, schema, rng)

    twin = np.random.default_rng(7)
    for _ in range(2):  # two truncated slots: donor index then h
        twin.integers(0, 2)
        schema.sample(twin)
    twin.choice(4, size=2, replace=False)
    for slot in out["injected"]:
        twin.integers(0, len(rep.occupied_indices()), size=1)
        assert pop.block.h_dicts[slot] == schema.sample(twin)


def test_population_update_degenerate_fractions_do_nothing():
    env = make_env("point-maze-trap")
    schema = schema_for("td3").with_overrides({"batch_size": {"value": 8}})
    pop = _fresh_population(env, schema, size=4, seed=23)
    rep = _seeded_repertoire(env, schema, pop.block.nets)
    before = _snapshot_block(pop.block)
    settings = tiny("pbt-me", population_size=4, worst_frac=0.0, donor_frac=0.25,
                    inject_frac=0.0)
    rng = np.random.default_rng(3)
    state_before = rng.bit_generator.state
    out = population_update(pop, rep, settings, schema, rng)
    assert out == {"truncated": [], "injected": []}
    assert rng.bit_generator.state == state_before
    for name, arr in pop.block.params.items():
        assert np.array_equal(arr, before["params"][name])
    assert pop.block.h_dicts == before["h"]


def test_train_population_parallel_equals_sequential():
    env = make_env("point-maze-trap")
    schema = schema_for("td3").with_overrides({"batch_size": {"value": 8}})
    pops = [_fresh_population(env, schema, size=3, seed=31) for _ in range(2)]
    spent = train_population(pops[0], env, steps_per_agent=25, parallel=True)
    assert spent == 75
    train_population(pops[1], env, steps_per_agent=25, parallel=False)
    a, b = pops
    for name in a.block.params:
        assert np.array_equal(a.block.params[name], b.block.params[name])
    for name in a.block.adam:
        assert np.array_equal(a.block.adam[name].m, b.block.adam[name].m)
        assert np.array_equal(a.block.adam[name].v, b.block.adam[name].v)
        assert np.array_equal(a.block.adam[name].step, b.block.adam[name].step)
    assert np.array_equal(a.block.calls, b.block.calls)
    for k in ("states", "actions", "rewards", "next_states", "dones"):
        assert np.array_equal(getattr(a.stack, k), getattr(b.stack, k))
    assert (a.stack.ptr, a.stack.size) == (b.stack.ptr, b.stack.size)
    for ra, rb in zip(a.rngs, b.rngs):
        assert ra.bit_generator.state == rb.bit_generator.state


def test_train_population_zero_learning_rates_freeze_params():
    env = make_env("point-maze-trap")
    schema = schema_for("td3").with_overrides({
        "batch_size": {"value": 4},
        "policy_lr": {"value": 0.0},
        "critic_lr": {"value": 0.0},
    })
    pop = _fresh_population(env, schema, size=3, seed=41)
    before = {k: v.copy() for k, v in pop.block.params.items()}
    train_population(pop, env, steps_per_agent=12, parallel=True)
    for name, arr in pop.block.params.items():
        assert np.array_equal(arr, before[name]), name
    assert pop.stack.size == 12  # experience still accumulates
    assert (pop.block.calls == 9).all()  # training began once 4 transitions existed


def test_sac_runner_smoke_on_arm():
    s = preset_settings(
        "desk", "pbt-me", env="planar-arm", algo="sac", population_size=3,
        steps_per_agent=20, offspring=3, num_cells=16, cvt_init_points=200,
        total_budget=300, hidden=(8, 8), seed=2,
        hyper_overrides={"batch_size": {"value": 8}},
    )
    env = CountingEnv(make_env("planar-arm"))
    res = run(s, env=env)
    # horizon 10: init (3+3)*10 = 60, iteration 3*20 + 6*10 = 120
    assert res.iterations == 2
    assert res.budget_consumed == 300 == env.steps
    assert len(res.repertoire.cells) > 0
