"""Twin-critic deterministic policy gradient with delayed actor updates.

All functions are stacked over a leading population axis and dtype-generic:
float32 in training, float64 when a test wants finite-difference headroom.
Loss functions are pure so they can be probed numerically; train_step wires
them to the Adam states on a TrainBlock and mutates it in place.
"""
from __future__ import annotations

import numpy as np

from qdpbt.agents import AlgoNets, TrainBlock
from qdpbt.nets import adam_step, backward_stacked, forward_acts, forward_stacked

POLICY_DELAY = 2


def smoothed_target_actions(
    nets: AlgoNets,
    target_actor: np.ndarray,
    next_states: np.ndarray,
    smoothing: np.ndarray,
    policy_noise: np.ndarray,
    noise_clip: np.ndarray,
) -> np.ndarray:
    """Target-policy actions with clipped smoothing noise, clipped to bounds."""
    noise = smoothing * policy_noise[:, None, None]
    clip = noise_clip[:, None, None]
    noise = np.clip(noise, -clip, clip)
    a = forward_stacked(nets.actor, target_actor, next_states) + noise
    return np.clip(a, -1.0, 1.0)


def critic_targets(
    nets: AlgoNets, params: dict[str, np.ndarray], batch: dict, draws: dict, h: dict
) -> np.ndarray:
    """Bootstrapped regression targets y, shape (pop, batch)."""
    a_next = smoothed_target_actions(
        nets,
        params["target_actor"],
        batch["next_states"],
        draws["smoothing"],
        h["policy_noise"],
        h["noise_clip"],
    )
    sa = np.concatenate([batch["next_states"], a_next], axis=2)
    q1 = forward_stacked(nets.critic, params["target_critic1"], sa)[:, :, 0]
    q2 = forward_stacked(nets.critic, params["target_critic2"], sa)[:, :, 0]
    q_min = np.minimum(q1, q2)
    return batch["rewards"] + h["discount"][:, None] * (1.0 - batch["dones"]) * q_min


def critic_loss(
    nets: AlgoNets, critic_params: np.ndarray, states, actions, y
) -> np.ndarray:
    sa = np.concatenate([states, actions], axis=2)
    q = forward_stacked(nets.critic, critic_params, sa)[:, :, 0]
    return np.mean((q - y) ** 2, axis=1)


def critic_grads(nets: AlgoNets, critic_params: np.ndarray, states, actions, y):
    """Mean squared error against fixed targets; returns (loss, grads)."""
    sa = np.concatenate([states, actions], axis=2)
    acts = forward_acts(nets.critic, critic_params, sa)
    q = acts[-1][:, :, 0]
    err = q - y
    batch = err.shape[1]
    upstream = ((2.0 / batch) * err)[:, :, None]
    grads, _ = backward_stacked(nets.critic, critic_params, sa, upstream, acts=acts)
    return np.mean(err**2, axis=1), grads


def actor_loss(nets: AlgoNets, actor_params, critic1_params, states) -> np.ndarray:
    a_pi = forward_stacked(nets.actor, actor_params, states)
    sa = np.concatenate([states, a_pi], axis=2)
    q = forward_stacked(nets.critic, critic1_params, sa)[:, :, 0]
    return -np.mean(q, axis=1)


def actor_grads(nets: AlgoNets, actor_params, critic1_params, states):
    """Deterministic policy gradient through the first critic only."""
    actor_acts = forward_acts(nets.actor, actor_params, states)
    a_pi = actor_acts[-1]
    sa = np.concatenate([states, a_pi], axis=2)
    critic_acts = forward_acts(nets.critic, critic1_params, sa)
    q = critic_acts[-1][:, :, 0]
    batch = states.shape[1]
    upstream = np.full((states.shape[0], batch, 1), -1.0 / batch, dtype=sa.dtype)
    _, d_sa = backward_stacked(nets.critic, critic1_params, sa, upstream, acts=critic_acts)
    d_action = d_sa[:, :, nets.state_dim :]
    grads, _ = backward_stacked(nets.actor, actor_params, states, d_action, acts=actor_acts)
    return -np.mean(q, axis=1), grads


POLYAK_PAIRS = (
    ("actor", "target_actor"),
    ("critic1", "target_critic1"),
    ("critic2", "target_critic2"),
)


def train_step(block: TrainBlock, batch: dict, draws: dict) -> dict:
    """Critic step every call; actor and targets on the delay schedule."""
    nets, h = block.nets, block.h32
    y = critic_targets(nets, block.params, batch, draws, h)

    critic_losses = np.zeros(block.pop)
    for name in ("critic1", "critic2"):
        loss, grads = critic_grads(nets, block.params[name], batch["states"], batch["actions"], y)
        res = adam_step(block.adam[name], block.params[name], grads, lr=h["critic_lr"])
        block.adam[name] = res.state
        block.params[name] = res.params
        critic_losses += loss

    calls_after = block.calls + 1
    update = (calls_after % POLICY_DELAY) == 0
    actor_losses = np.full(block.pop, np.nan)
    if update.any():
        loss, grads = actor_grads(
            nets, block.params["actor"], block.params["critic1"], batch["states"]
        )
        res = adam_step(
            block.adam["actor"], block.params["actor"], grads, lr=h["policy_lr"], mask=update
        )
        block.adam["actor"] = res.state
        block.params["actor"] = res.params
        actor_losses = np.where(update, loss, np.nan)

        tau = h["tau"][:, None]
        keep = update[:, None]
        for live, target in POLYAK_PAIRS:
            # diff form is exact when live == target, so frozen nets stay put
            mixed = block.params[target] + tau * (block.params[live] - block.params[target])
            block.params[target] = np.where(keep, mixed, block.params[target])
    block.calls = calls_after
    return {
        "critic_loss": critic_losses,
        "actor_loss": actor_losses,
        "actor_updated": update,
    }
