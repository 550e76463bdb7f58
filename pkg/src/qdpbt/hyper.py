"""Hyperparameter schemas: named ranges with a sampling rule, or fixed values.

Every agent carries a flat name -> float dict sampled from its algorithm's
schema. Ranged entries are drawn uniformly, on a log scale for learning
rates; fixed entries never consume randomness. Config files can override
low/high/value/scale per name.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HyperSpec:
    name: str
    low: float | None = None
    high: float | None = None
    value: float | None = None
    scale: str = "linear"

    def __post_init__(self):
        if (self.value is None) == (self.low is None or self.high is None):
            raise ValueError(f"{self.name}: give either value or both low and high")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"{self.name}: scale must be linear or log, got {self.scale!r}")
        if self.value is None:
            if not (self.low < self.high):
                raise ValueError(f"{self.name}: low must be below high")
            if self.scale == "log" and self.low <= 0:
                raise ValueError(f"{self.name}: log scale needs a positive low")

    @property
    def fixed(self) -> bool:
        return self.value is not None


@dataclass(frozen=True)
class HyperSchema:
    entries: tuple[HyperSpec, ...]

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate hyperparameter names in {names}")

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def ranged_names(self) -> list[str]:
        return [e.name for e in self.entries if not e.fixed]

    def get(self, name: str) -> HyperSpec:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def sample(self, rng: np.random.Generator) -> dict[str, float]:
        """One draw per ranged entry, in schema order; fixed entries draw nothing."""
        out = {}
        for e in self.entries:
            if e.fixed:
                out[e.name] = float(e.value)
            elif e.scale == "log":
                out[e.name] = float(np.exp(rng.uniform(np.log(e.low), np.log(e.high))))
            else:
                out[e.name] = float(rng.uniform(e.low, e.high))
        return out

    def contains(self, h: dict[str, float]) -> bool:
        for e in self.entries:
            v = h.get(e.name)
            if v is None:
                return False
            if e.fixed:
                if v != e.value:
                    return False
            elif not (e.low <= v <= e.high):
                return False
        return True

    def with_overrides(self, overrides: dict[str, dict[str, float | str]]) -> "HyperSchema":
        """New schema with per-name field overrides, e.g. {"batch_size": {"value": 32}}."""
        known = set(self.names())
        for name in overrides:
            if name not in known:
                raise ValueError(f"override for unknown hyperparameter {name!r}")
        new_entries = []
        for e in self.entries:
            ov = overrides.get(e.name)
            if not ov:
                new_entries.append(e)
                continue
            bad = set(ov) - {"low", "high", "value", "scale"}
            if bad:
                raise ValueError(f"{e.name}: unknown override fields {sorted(bad)}")
            fields = {"low": e.low, "high": e.high, "value": e.value, "scale": e.scale}
            fields.update(ov)
            if "value" in ov:
                fields["low"] = fields["high"] = None
            elif "low" in ov or "high" in ov:
                fields["value"] = None
            new_entries.append(HyperSpec(e.name, **fields))
        return HyperSchema(tuple(new_entries))


TD3_SCHEMA = HyperSchema(
    (
        HyperSpec("discount", low=0.9, high=1.0),
        HyperSpec("policy_lr", low=3e-5, high=3e-3, scale="log"),
        HyperSpec("critic_lr", low=3e-5, high=3e-3, scale="log"),
        HyperSpec("noise_clip", low=0.0, high=1.0),
        HyperSpec("policy_noise", low=0.0, high=1.0),
        HyperSpec("exploration_noise", low=0.0, high=0.2),
        HyperSpec("tau", value=0.005),
        HyperSpec("batch_size", value=256),
    )
)

SAC_SCHEMA = HyperSchema(
    (
        HyperSpec("discount", low=0.9, high=1.0),
        HyperSpec("policy_lr", low=3e-5, high=3e-3, scale="log"),
        HyperSpec("critic_lr", low=3e-5, high=3e-3, scale="log"),
        HyperSpec("alpha_lr", low=3e-5, high=3e-3, scale="log"),
        HyperSpec("reward_scale", low=0.1, high=10.0),
        HyperSpec("tau", value=0.005),
        HyperSpec("alpha_init", value=1.0),
        HyperSpec("batch_size", value=256),
    )
)

SCHEMAS = {"td3": TD3_SCHEMA, "sac": SAC_SCHEMA}


def schema_for(algo: str) -> HyperSchema:
    try:
        return SCHEMAS[algo]
    except KeyError:
        raise ValueError(f"unknown algorithm {algo!r}, available: {sorted(SCHEMAS)}") from None
