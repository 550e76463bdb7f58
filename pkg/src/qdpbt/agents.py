"""Agents: flat-parameter actor-critic bundles plus population training state.

An Agent is a value object: actor parameters (theta), the other learnables
(phi: critics, targets, and for the entropy-regularized algorithm the log
temperature), and a flat hyperparameter dict (h). Optimizer moments are
transient training state, never copied into the repertoire and never
serialized.

Training operates on a TrainBlock, the population stacked along a leading
axis so one call advances every slot. Single-agent training wraps a one-row
block around the same kernels, so both paths run identical math.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from qdpbt.buffers import ReplayBuffer, StackedReplayBuffer
from qdpbt.nets import AdamState, MlpSpec, forward, forward_stacked, init_params

PHI_ORDER = {
    "td3": ("critic1", "critic2", "target_actor", "target_critic1", "target_critic2"),
    "sac": ("critic1", "critic2", "target_critic1", "target_critic2", "log_alpha"),
}
TRAINABLE = {
    "td3": ("actor", "critic1", "critic2"),
    "sac": ("actor", "critic1", "critic2", "log_alpha"),
}
ALGOS = tuple(PHI_ORDER)


@dataclass(frozen=True)
class AlgoNets:
    """Network shapes shared by every agent in a run."""

    algo: str
    state_dim: int
    action_dim: int
    actor: MlpSpec
    critic: MlpSpec

    def component_size(self, name: str) -> int:
        if name == "actor" or name == "target_actor":
            return self.actor.num_params
        if name == "log_alpha":
            return 1
        return self.critic.num_params


def make_nets(algo: str, state_dim: int, action_dim: int, hidden: tuple[int, ...]) -> AlgoNets:
    if algo == "td3":
        actor = MlpSpec((state_dim, *hidden, action_dim), "relu", "tanh")
    elif algo == "sac":
        # outputs are mean and raw log-std per action dimension
        actor = MlpSpec((state_dim, *hidden, 2 * action_dim), "relu", "identity")
    else:
        raise ValueError(f"unknown algorithm {algo!r}, available: {sorted(ALGOS)}")
    critic = MlpSpec((state_dim + action_dim, *hidden, 1), "relu", "identity")
    return AlgoNets(algo, state_dim, action_dim, actor, critic)


@dataclass
class Agent:
    nets: AlgoNets
    theta: np.ndarray  # actor parameters
    phi: dict[str, np.ndarray]  # other learnables, keyed per PHI_ORDER
    h: dict[str, float]
    opt: Optional[dict[str, AdamState]] = field(default=None, repr=False)
    train_calls: int = 0

    @property
    def algo(self) -> str:
        return self.nets.algo


def init_agent(
    nets: AlgoNets, h: dict[str, float], rng: np.random.Generator
) -> Agent:
    """Fresh agent; draws actor then critic1 then critic2, targets are copies."""
    theta = init_params(nets.actor, rng)
    c1 = init_params(nets.critic, rng)
    c2 = init_params(nets.critic, rng)
    if nets.algo == "td3":
        phi = {
            "critic1": c1,
            "critic2": c2,
            "target_actor": theta.copy(),
            "target_critic1": c1.copy(),
            "target_critic2": c2.copy(),
        }
    else:
        log_alpha = np.array([np.log(h.get("alpha_init", 1.0))], dtype=np.float32)
        phi = {
            "critic1": c1,
            "critic2": c2,
            "target_critic1": c1.copy(),
            "target_critic2": c2.copy(),
            "log_alpha": log_alpha,
        }
    return Agent(nets=nets, theta=theta, phi=phi, h=dict(h))


def copy_agent(agent: Agent) -> Agent:
    """Deep copy of (theta, phi, h); optimizer state is deliberately dropped."""
    return Agent(
        nets=agent.nets,
        theta=agent.theta.copy(),
        phi={k: v.copy() for k, v in agent.phi.items()},
        h=dict(agent.h),
    )


def flat_learnables(agent: Agent) -> np.ndarray:
    """theta and phi concatenated in declared order, the variation vector."""
    return np.concatenate([agent.theta] + [agent.phi[k] for k in PHI_ORDER[agent.algo]])


def agent_from_flat(template: Agent, flat: np.ndarray) -> Agent:
    """Rebuild an agent from a flat vector; h comes from the template verbatim."""
    nets = template.nets
    sizes = [nets.actor.num_params] + [nets.component_size(k) for k in PHI_ORDER[nets.algo]]
    if flat.shape != (sum(sizes),):
        raise ValueError(f"flat vector of length {sum(sizes)} expected, got {flat.shape}")
    parts = np.split(flat, np.cumsum(sizes)[:-1])
    phi = {k: parts[1 + i].copy() for i, k in enumerate(PHI_ORDER[nets.algo])}
    return Agent(nets=nets, theta=parts[0].copy(), phi=phi, h=dict(template.h))


@dataclass
class TrainBlock:
    """Population training state stacked along the leading axis."""

    nets: AlgoNets
    pop: int
    params: dict[str, np.ndarray]  # component -> (pop, n) float32
    adam: dict[str, AdamState]  # trainable component -> stacked moments
    h32: dict[str, np.ndarray]  # hyperparameter -> (pop,) float32, for math
    h_dicts: list[dict[str, float]]  # authoritative per-slot values
    calls: np.ndarray  # (pop,) int64 train-step counter


def block_from_agents(agents: list[Agent]) -> TrainBlock:
    nets = agents[0].nets
    pop = len(agents)
    comps = ("actor",) + PHI_ORDER[nets.algo]
    params = {}
    for comp in comps:
        rows = [ag.theta if comp == "actor" else ag.phi[comp] for ag in agents]
        params[comp] = np.stack(rows).astype(np.float32, copy=True)
    adam = {}
    for comp in TRAINABLE[nets.algo]:
        st = AdamState.zeros(pop, nets.component_size(comp))
        for i, ag in enumerate(agents):
            if ag.opt and comp in ag.opt:
                st.m[i] = ag.opt[comp].m[0]
                st.v[i] = ag.opt[comp].v[0]
                st.step[i] = ag.opt[comp].step[0]
        adam[comp] = st
    names = list(agents[0].h)
    h32 = {n: np.array([ag.h[n] for ag in agents], dtype=np.float32) for n in names}
    return TrainBlock(
        nets=nets,
        pop=pop,
        params=params,
        adam=adam,
        h32=h32,
        h_dicts=[dict(ag.h) for ag in agents],
        calls=np.array([ag.train_calls for ag in agents], dtype=np.int64),
    )


def agent_from_block(block: TrainBlock, i: int) -> Agent:
    nets = block.nets
    phi = {k: block.params[k][i].copy() for k in PHI_ORDER[nets.algo]}
    opt = {}
    for comp, st in block.adam.items():
        opt[comp] = AdamState(
            m=st.m[i : i + 1].copy(), v=st.v[i : i + 1].copy(), step=st.step[i : i + 1].copy()
        )
    return Agent(
        nets=nets,
        theta=block.params["actor"][i].copy(),
        phi=phi,
        h=dict(block.h_dicts[i]),
        opt=opt,
        train_calls=int(block.calls[i]),
    )


def slice_block(block: TrainBlock, i: int) -> TrainBlock:
    """One-row copy of slot i; training it leaves the parent untouched."""
    from qdpbt.nets import AdamState

    return TrainBlock(
        nets=block.nets,
        pop=1,
        params={k: v[i : i + 1].copy() for k, v in block.params.items()},
        adam={
            k: AdamState(st.m[i : i + 1].copy(), st.v[i : i + 1].copy(), st.step[i : i + 1].copy())
            for k, st in block.adam.items()
        },
        h32={k: v[i : i + 1].copy() for k, v in block.h32.items()},
        h_dicts=[dict(block.h_dicts[i])],
        calls=block.calls[i : i + 1].copy(),
    )


def merge_block_row(block: TrainBlock, i: int, row: TrainBlock) -> None:
    """Write a one-row block back into slot i (inverse of slice_block)."""
    for k in block.params:
        block.params[k][i] = row.params[k][0]
    for k, st in block.adam.items():
        st.m[i] = row.adam[k].m[0]
        st.v[i] = row.adam[k].v[0]
        st.step[i] = row.adam[k].step[0]
    block.calls[i] = row.calls[0]


def write_agent_into_block(block: TrainBlock, i: int, agent: Agent) -> None:
    """Install an agent into slot i with fresh optimizer state."""
    block.params["actor"][i] = agent.theta
    for k in PHI_ORDER[block.nets.algo]:
        block.params[k][i] = agent.phi[k]
    for comp, st in block.adam.items():
        st.m[i] = 0.0
        st.v[i] = 0.0
        st.step[i] = 0
    block.h_dicts[i] = dict(agent.h)
    for name, arr in block.h32.items():
        arr[i] = agent.h[name]
    block.calls[i] = 0


# --- acting ---------------------------------------------------------------


def exploit_action(agent: Agent, state: np.ndarray) -> np.ndarray:
    """Deterministic action used for evaluation."""
    x = np.asarray(state, dtype=np.float32)
    out = forward(agent.nets.actor, agent.theta, x)
    if agent.algo == "td3":
        return out
    mu = out[: agent.nets.action_dim]
    return np.tanh(mu)


def explore_action(agent: Agent, state: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Stochastic action used while collecting experience; eps is (action_dim,)."""
    x = np.asarray(state, dtype=np.float32)
    out = forward(agent.nets.actor, agent.theta, x)
    if agent.algo == "td3":
        noisy = out + agent.h["exploration_noise"] * eps.astype(np.float32)
        return np.clip(noisy, -1.0, 1.0).astype(np.float32)
    from qdpbt.sac import squash_sample_single

    return squash_sample_single(out, eps.astype(np.float32), agent.nets.action_dim)


# --- rollouts ---------------------------------------------------------------


@dataclass
class EvalResult:
    fitness: float
    descriptor: np.ndarray
    steps: int
    states: Optional[np.ndarray] = None
    actions: Optional[np.ndarray] = None
    rewards: Optional[np.ndarray] = None


def evaluate(agent: Agent, env, rng=None, return_trajectory: bool = False) -> EvalResult:
    """One full episode with the deterministic policy. No buffer writes.

    Depends on (theta, env) only, so equal policies give equal results
    regardless of h, and re-running is exact.
    """
    state = env.reset()
    horizon = env.spec.episode_length
    total = 0.0
    states = [state]
    actions = []
    rewards = []
    for _ in range(horizon):
        a = exploit_action(agent, state)
        state, r = env.step(state, a)
        total += r
        if return_trajectory:
            states.append(state)
            actions.append(a)
            rewards.append(r)
    descriptor = env.descriptor_from_state(state)
    if return_trajectory:
        return EvalResult(
            float(total), descriptor, horizon, np.array(states), np.array(actions), np.array(rewards)
        )
    return EvalResult(float(total), descriptor, horizon)


def evaluate_stacked(agent_list: list[Agent], env) -> list[EvalResult]:
    """Evaluate same-architecture agents in one batched rollout.

    Row k reproduces evaluate(agent_list[k], env) bitwise: stepping and the
    reward are per-row functions, and the stacked forward pass equals the
    single-agent one row for row.
    """
    nets = agent_list[0].nets
    thetas = np.stack([a.theta for a in agent_list])
    states = env.reset_batch(len(agent_list))
    horizon = env.spec.episode_length
    totals = np.zeros(len(agent_list), dtype=np.float64)
    for _ in range(horizon):
        x = np.asarray(states, dtype=np.float32)[:, None, :]
        out = forward_stacked(nets.actor, thetas, x)[:, 0, :]
        actions = out if nets.algo == "td3" else np.tanh(out[:, : nets.action_dim])
        states, rewards = env.step_batch(states, actions)
        totals += rewards
    return [
        EvalResult(float(totals[k]), env.descriptor_from_state(states[k]), horizon)
        for k in range(len(agent_list))
    ]


def collect_experience(
    agent: Agent, env, num_steps: int, buffer: ReplayBuffer, rng: np.random.Generator
) -> int:
    """Roll the exploration policy for num_steps steps, resetting as episodes end.

    Starts a fresh episode; a trailing partial episode is recorded without a
    terminal flag. Returns the number of environment steps consumed.
    """
    state = env.reset()
    t_in_ep = 0
    for _ in range(num_steps):
        eps = rng.standard_normal(env.spec.action_dim)
        a = explore_action(agent, state, eps)
        next_state, r = env.step(state, a)
        t_in_ep += 1
        done = t_in_ep >= env.spec.episode_length
        buffer.append(state, a, r, next_state, done)
        state = next_state
        if done:
            state = env.reset()
            t_in_ep = 0
    return num_steps


# --- training entry points ---------------------------------------------------


def draw_training_batch(
    algo: str,
    stack: StackedReplayBuffer,
    rngs: list[np.random.Generator],
    batch: int,
    action_dim: int,
):
    """Sample a batch and the per-slot noise draws in the pinned order.

    Per slot: batch indices first, then the algorithm's noise tensors. Both
    the population path and the single-agent path go through here, so their
    random streams line up however training is executed.
    """
    idx = stack.sample_indices(rngs, batch)
    data = stack.gather(idx)
    draws = {}
    if algo == "td3":
        draws["smoothing"] = np.stack(
            [rng.standard_normal((batch, action_dim)) for rng in rngs]
        ).astype(np.float32)
    else:
        draws["eps_next"] = np.stack(
            [rng.standard_normal((batch, action_dim)) for rng in rngs]
        ).astype(np.float32)
        draws["eps_cur"] = np.stack(
            [rng.standard_normal((batch, action_dim)) for rng in rngs]
        ).astype(np.float32)
    return data, draws


def train_step_block(block: TrainBlock, batch: dict, draws: dict) -> dict:
    """One gradient step for every slot in the block. Mutates the block."""
    if block.nets.algo == "td3":
        from qdpbt.td3 import train_step

        return train_step(block, batch, draws)
    from qdpbt.sac import train_step

    return train_step(block, batch, draws)


def _train_step_single(agent: Agent, buffer: ReplayBuffer, rng: np.random.Generator):
    batch_size = int(agent.h["batch_size"])
    if len(buffer) < batch_size:
        return agent, {"status": "skipped", "reason": "buffer below batch size"}
    block = block_from_agents([agent])
    data, draws = draw_training_batch(
        agent.algo, buffer._stack, [rng], batch_size, agent.nets.action_dim
    )
    diag = train_step_block(block, data, draws)
    return agent_from_block(block, 0), diag


def td3_train_step(agent: Agent, buffer: ReplayBuffer, rng: np.random.Generator):
    """One critic update, with the delayed actor/target update when due."""
    if agent.algo != "td3":
        raise ValueError(f"td3_train_step on a {agent.algo} agent")
    return _train_step_single(agent, buffer, rng)


def sac_train_step(agent: Agent, buffer: ReplayBuffer, rng: np.random.Generator):
    """One joint critic/actor/temperature update."""
    if agent.algo != "sac":
        raise ValueError(f"sac_train_step on a {agent.algo} agent")
    return _train_step_single(agent, buffer, rng)
