"""Isoline crossover-mutation over flat parameter vectors.

A child is parent1 plus isotropic Gaussian noise plus a random step along the
line toward parent2:

    child = p1 + sigma_iso * eps + u * (p2 - p1)

with eps drawn i.i.d. standard normal per coordinate and u a single scalar
from N(0, sigma_line^2) shared across every coordinate. Policy and the other
learnable parameters of an agent are varied jointly as one concatenated
vector, so the line step couples them. Hyperparameters are not varied: the
child inherits parent1's verbatim.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class IsolineParams:
    sigma_iso: float
    sigma_line: float

    def __post_init__(self):
        if self.sigma_iso < 0 or self.sigma_line < 0:
            raise ValueError("isoline sigmas must be non-negative")


def isoline(
    p1: np.ndarray, p2: np.ndarray, params: IsolineParams, rng: np.random.Generator
) -> np.ndarray:
    """One child vector. Draw order is eps (vector) then u (scalar)."""
    if p1.shape != p2.shape:
        raise ValueError(f"parent shapes differ: {p1.shape} vs {p2.shape}")
    if params.sigma_iso == 0.0 and params.sigma_line == 0.0:
        return p1.copy()
    eps = rng.standard_normal(p1.shape[0])
    u = rng.standard_normal()
    a = p1.astype(np.float64, copy=False)
    b = p2.astype(np.float64, copy=False)
    child = a + params.sigma_iso * eps + (params.sigma_line * u) * (b - a)
    return child.astype(p1.dtype)


def vary_agents(
    parents: Sequence[tuple],
    params: IsolineParams,
    rng: np.random.Generator,
) -> list:
    """Offspring for a sequence of (parent1, parent2) Agent pairs.

    Each pair yields one child: theta and phi concatenated, isoline applied,
    split back. The child keeps parent1's hyperparameters and starts with
    fresh optimizer state.
    """
    from qdpbt.agents import agent_from_flat, flat_learnables

    children = []
    for p1, p2 in parents:
        v1 = flat_learnables(p1)
        v2 = flat_learnables(p2)
        children.append(agent_from_flat(p1, isoline(v1, v2, params, rng)))
    return children
