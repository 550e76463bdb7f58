"""Soft actor-critic with a squashed Gaussian policy and learned temperature.

The actor outputs mean and raw log-std per action dimension; log-std is
clamped, the sample is reparametrized as mu + std * eps, and the tanh squash
is corrected in the log-density. Gradients are assembled by hand from the
network backward passes; the loss functions are pure and dtype-generic so
tests can difference them numerically.
"""
from __future__ import annotations

import numpy as np

from qdpbt.agents import AlgoNets, TrainBlock
from qdpbt.nets import adam_step, backward_stacked, forward_acts, forward_stacked
from qdpbt.td3 import critic_grads

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
SQUASH_EPS = 1e-6
LOG_2PI = float(np.log(2.0 * np.pi))


def squash_sample_single(actor_out: np.ndarray, eps: np.ndarray, action_dim: int) -> np.ndarray:
    """Exploration action from one actor output vector, shape (2 * action_dim,)."""
    mu = actor_out[:action_dim]
    log_std = np.clip(actor_out[action_dim:], LOG_STD_MIN, LOG_STD_MAX)
    return np.tanh(mu + np.exp(log_std) * eps)


def actor_terms(nets: AlgoNets, actor_params: np.ndarray, states: np.ndarray, eps: np.ndarray):
    """Forward pass of the policy with fixed noise; returns intermediates.

    eps has shape (pop, batch, action_dim) and is held constant, so every
    returned tensor is a deterministic function of the parameters.
    """
    ad = nets.action_dim
    acts = forward_acts(nets.actor, actor_params, states)
    out = acts[-1]
    mu = out[:, :, :ad]
    raw = out[:, :, ad:]
    log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
    std = np.exp(log_std)
    u = mu + std * eps
    action = np.tanh(u)
    sech2 = 1.0 - action**2
    log_prob = (
        -0.5 * eps**2 - log_std - 0.5 * LOG_2PI - np.log(sech2 + SQUASH_EPS)
    ).sum(axis=2)
    return {
        "raw": raw,
        "std": std,
        "action": action,
        "sech2": sech2,
        "log_prob": log_prob,
        "acts": acts,
    }


def actor_loss(
    nets: AlgoNets,
    actor_params: np.ndarray,
    critic1_params: np.ndarray,
    critic2_params: np.ndarray,
    states: np.ndarray,
    eps: np.ndarray,
    alpha: np.ndarray,
) -> np.ndarray:
    """mean(alpha * log pi - min(Q1, Q2)) per slot, shape (pop,)."""
    terms = actor_terms(nets, actor_params, states, eps)
    sa = np.concatenate([states, terms["action"]], axis=2)
    q1 = forward_stacked(nets.critic, critic1_params, sa)[:, :, 0]
    q2 = forward_stacked(nets.critic, critic2_params, sa)[:, :, 0]
    return np.mean(alpha[:, None] * terms["log_prob"] - np.minimum(q1, q2), axis=1)


def actor_grads(
    nets: AlgoNets,
    actor_params: np.ndarray,
    critic1_params: np.ndarray,
    critic2_params: np.ndarray,
    states: np.ndarray,
    eps: np.ndarray,
    alpha: np.ndarray,
):
    """Returns (loss, actor grads, log_prob); log_prob feeds the temperature."""
    terms = actor_terms(nets, actor_params, states, eps)
    action, sech2, std = terms["action"], terms["sech2"], terms["std"]
    batch = states.shape[1]
    sa = np.concatenate([states, action], axis=2)
    acts1 = forward_acts(nets.critic, critic1_params, sa)
    acts2 = forward_acts(nets.critic, critic2_params, sa)
    q1 = acts1[-1][:, :, 0]
    q2 = acts2[-1][:, :, 0]
    loss = np.mean(alpha[:, None] * terms["log_prob"] - np.minimum(q1, q2), axis=1)

    # route d(min)/d(action) through whichever critic is active per sample
    m1 = (q1 <= q2).astype(sa.dtype)
    _, d_sa1 = backward_stacked(nets.critic, critic1_params, sa, m1[:, :, None], acts=acts1)
    _, d_sa2 = backward_stacked(nets.critic, critic2_params, sa, (1.0 - m1)[:, :, None], acts=acts2)
    d_q_min = (d_sa1 + d_sa2)[:, :, nets.state_dim :]

    a_col = alpha[:, None, None]
    denom = sech2 + SQUASH_EPS
    # d loss / d u, with logp's squash correction and the critic pulled back
    # through tanh; everything carries the 1/batch of the mean
    d_u = (a_col * 2.0 * action * sech2 / denom - d_q_min * sech2) / batch
    in_clamp = (terms["raw"] >= LOG_STD_MIN) & (terms["raw"] <= LOG_STD_MAX)
    d_raw = (d_u * std * eps - a_col / batch) * in_clamp
    upstream = np.concatenate([d_u, d_raw], axis=2)
    grads, _ = backward_stacked(nets.actor, actor_params, states, upstream, acts=terms["acts"])
    return loss, grads, terms["log_prob"]


def critic_targets(
    nets: AlgoNets,
    params: dict[str, np.ndarray],
    batch: dict,
    eps_next: np.ndarray,
    alpha: np.ndarray,
    h: dict,
) -> np.ndarray:
    """Soft bootstrapped targets on scaled rewards, shape (pop, batch)."""
    terms = actor_terms(nets, params["actor"], batch["next_states"], eps_next)
    sa = np.concatenate([batch["next_states"], terms["action"]], axis=2)
    q1 = forward_stacked(nets.critic, params["target_critic1"], sa)[:, :, 0]
    q2 = forward_stacked(nets.critic, params["target_critic2"], sa)[:, :, 0]
    soft_value = np.minimum(q1, q2) - alpha[:, None] * terms["log_prob"]
    scaled_r = h["reward_scale"][:, None] * batch["rewards"]
    return scaled_r + h["discount"][:, None] * (1.0 - batch["dones"]) * soft_value


def alpha_loss_and_grad(log_alpha: np.ndarray, log_prob: np.ndarray, target_entropy: float):
    """Temperature objective -mean(log_alpha * (log pi + target)); log pi is fixed."""
    gap = np.mean(log_prob + target_entropy, axis=1)
    loss = -log_alpha[:, 0] * gap
    grad = -gap[:, None].astype(log_alpha.dtype)
    return loss, grad


def train_step(block: TrainBlock, batch: dict, draws: dict) -> dict:
    """Critics, then actor, then temperature, then target smoothing."""
    nets, h = block.nets, block.h32
    alpha = np.exp(block.params["log_alpha"][:, 0])
    y = critic_targets(nets, block.params, batch, draws["eps_next"], alpha, h)

    critic_losses = np.zeros(block.pop)
    for name in ("critic1", "critic2"):
        loss, grads = critic_grads(nets, block.params[name], batch["states"], batch["actions"], y)
        res = adam_step(block.adam[name], block.params[name], grads, lr=h["critic_lr"])
        block.adam[name] = res.state
        block.params[name] = res.params
        critic_losses += loss

    actor_loss_v, grads, log_prob = actor_grads(
        nets,
        block.params["actor"],
        block.params["critic1"],
        block.params["critic2"],
        batch["states"],
        draws["eps_cur"],
        alpha,
    )
    res = adam_step(block.adam["actor"], block.params["actor"], grads, lr=h["policy_lr"])
    block.adam["actor"] = res.state
    block.params["actor"] = res.params

    target_entropy = -float(nets.action_dim)
    _, a_grad = alpha_loss_and_grad(block.params["log_alpha"], log_prob, target_entropy)
    res = adam_step(block.adam["log_alpha"], block.params["log_alpha"], a_grad, lr=h["alpha_lr"])
    block.adam["log_alpha"] = res.state
    block.params["log_alpha"] = res.params

    tau = h["tau"][:, None]
    for live, target in (("critic1", "target_critic1"), ("critic2", "target_critic2")):
        # diff form is exact when live == target, so frozen nets stay put
        block.params[target] = block.params[target] + tau * (
            block.params[live] - block.params[target]
        )
    block.calls = block.calls + 1
    return {
        "critic_loss": critic_losses,
        "actor_loss": actor_loss_v,
        "alpha": alpha,
        "entropy": -np.mean(log_prob, axis=1),
    }
