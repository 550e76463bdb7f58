"""Run configuration: one flat settings record, INI files, named presets.

Settings resolve in three layers: preset defaults (picked by preset name and
runner), then the INI file's sections, then explicit overrides (CLI flags or
request fields). Unknown sections, keys, or hyperparameter names are errors,
never silently ignored.
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import asdict, dataclass, field, replace

from qdpbt.envs import ENV_BUILDERS
from qdpbt.hyper import schema_for

RUNNERS = ("pbt-me", "map-elites", "pbt")


@dataclass(frozen=True)
class RunSettings:
    runner: str = "pbt-me"
    env: str = "point-maze-trap"
    algo: str = "td3"
    seed: int = 0
    total_budget: int = 2_000_000
    out_dir: str | None = None
    checkpoint_every: int = 0  # iterations between snapshots; 0 = final only
    parallel_training: bool = True

    population_size: int = 20
    worst_frac: float = 0.2
    donor_frac: float = 0.1
    inject_frac: float = 0.4
    steps_per_agent: int = 500
    resample_h_on_injection: bool = False

    num_cells: int = 256
    cvt_init_points: int = 10_000
    offspring: int = 60
    sigma_iso: float = 0.005
    sigma_line: float = 0.05

    hidden: tuple[int, ...] = (64, 64)
    buffer_capacity: int = 100_000
    hyper_overrides: dict = field(default_factory=dict)


_COMMON_PRESETS = {
    "paper": dict(
        total_budget=150_000_000,
        num_cells=1024,
        cvt_init_points=50_000,
        hidden=(256, 256),
        buffer_capacity=100_000,
        sigma_iso=0.005,
        sigma_line=0.05,
        hyper_overrides={},
    ),
    "desk": dict(
        total_budget=2_000_000,
        num_cells=256,
        cvt_init_points=10_000,
        hidden=(64, 64),
        buffer_capacity=100_000,
        sigma_iso=0.005,
        sigma_line=0.05,
        # keeps single-core training steps cheap at desk scale
        hyper_overrides={"batch_size": {"value": 32}},
    ),
}

_RUNNER_PRESETS = {
    "paper": {
        "pbt-me": dict(population_size=80, worst_frac=0.2, donor_frac=0.1, inject_frac=0.4,
                       steps_per_agent=5000, offspring=240),
        "pbt": dict(population_size=80, worst_frac=0.4, donor_frac=0.1, inject_frac=0.0,
                    steps_per_agent=5000, offspring=0),
        "map-elites": dict(population_size=0, worst_frac=0.0, donor_frac=0.0, inject_frac=0.0,
                           steps_per_agent=0, offspring=1000),
    },
    "desk": {
        "pbt-me": dict(population_size=20, worst_frac=0.2, donor_frac=0.1, inject_frac=0.4,
                       steps_per_agent=500, offspring=60),
        "pbt": dict(population_size=20, worst_frac=0.4, donor_frac=0.1, inject_frac=0.0,
                    steps_per_agent=500, offspring=0),
        "map-elites": dict(population_size=0, worst_frac=0.0, donor_frac=0.0, inject_frac=0.0,
                           steps_per_agent=0, offspring=60),
    },
}


def preset_settings(preset: str, runner: str, **extra) -> RunSettings:
    if preset not in _COMMON_PRESETS:
        raise ValueError(f"unknown preset {preset!r}, available: {sorted(_COMMON_PRESETS)}")
    if runner not in RUNNERS:
        raise ValueError(f"unknown runner {runner!r}, available: {sorted(RUNNERS)}")
    fields = dict(_COMMON_PRESETS[preset])
    fields.update(_RUNNER_PRESETS[preset][runner])
    fields["runner"] = runner
    fields.update(extra)
    return validate(RunSettings(**fields))


# INI layout: section -> {key: settings field}
_SECTIONS = {
    "run": {
        "runner": ("runner", str),
        "env": ("env", str),
        "algo": ("algo", str),
        "seed": ("seed", int),
        "total_budget": ("total_budget", int),
        "out_dir": ("out_dir", str),
        "checkpoint_every": ("checkpoint_every", int),
        "parallel_training": ("parallel_training", bool),
    },
    "population": {
        "size": ("population_size", int),
        "worst_frac": ("worst_frac", float),
        "donor_frac": ("donor_frac", float),
        "inject_frac": ("inject_frac", float),
        "steps_per_agent": ("steps_per_agent", int),
        "resample_h_on_injection": ("resample_h_on_injection", bool),
    },
    "repertoire": {
        "num_cells": ("num_cells", int),
        "cvt_init_points": ("cvt_init_points", int),
        "offspring": ("offspring", int),
        "sigma_iso": ("sigma_iso", float),
        "sigma_line": ("sigma_line", float),
    },
    "training": {
        "hidden": ("hidden", "hidden"),
        "buffer_capacity": ("buffer_capacity", int),
    },
}

_BOOL_WORDS = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def _convert(raw: str, kind, where: str):
    raw = raw.strip()
    try:
        if kind is bool:
            return _BOOL_WORDS[raw.lower()]
        if kind is int:
            v = float(raw)  # accept 2e6 style
            if v != int(v):
                raise ValueError
            return int(v)
        if kind is float:
            return float(raw)
        if kind == "hidden":
            sizes = tuple(int(tok) for tok in raw.replace(",", " ").split())
            if not sizes or any(s < 1 for s in sizes):
                raise ValueError
            return sizes
        return raw
    except (ValueError, KeyError):
        raise ValueError(f"{where}: cannot parse {raw!r} as {getattr(kind, '__name__', kind)}")


def parse_ini(text: str, base: RunSettings | None = None) -> RunSettings:
    """Settings from INI text layered on base (or on preset named inside [run])."""
    cp = configparser.ConfigParser()
    cp.read_string(text)
    # the preset (with the file's runner, if any) forms the base layer
    preset = None
    if cp.has_option("run", "preset"):
        preset = cp.get("run", "preset").strip()
        cp.remove_option("run", "preset")
    if base is None:
        runner = cp.get("run", "runner", fallback="pbt-me").strip()
        base = preset_settings(preset, runner) if preset else RunSettings(runner=runner)
    elif preset:
        raise ValueError("preset cannot be combined with an explicit base settings object")

    updates: dict = {}
    for section in cp.sections():
        if section == "hyperparams":
            continue
        if section not in _SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SECTIONS[section]:
                known = ", ".join(sorted(_SECTIONS[section]))
                raise ValueError(f"unknown key {key!r} in [{section}] (known: {known})")
            field_name, kind = _SECTIONS[section][key]
            updates[field_name] = _convert(raw, kind, f"[{section}] {key}")

    if cp.has_section("hyperparams"):
        overrides = dict(base.hyper_overrides)
        for dotted, raw in cp.items("hyperparams"):
            if "." not in dotted:
                raise ValueError(
                    f"[hyperparams] keys are name.field, e.g. discount.low; got {dotted!r}"
                )
            name, fld = dotted.rsplit(".", 1)
            entry = dict(overrides.get(name, {}))
            entry[fld] = raw.strip() if fld == "scale" else float(raw)
            overrides[name] = entry
        updates["hyper_overrides"] = overrides

    return validate(replace(base, **updates))


def emit_ini(settings: RunSettings) -> str:
    """Round-trippable INI echo of the settings."""
    cp = configparser.ConfigParser()
    values = asdict(settings)
    for section, keys in _SECTIONS.items():
        cp.add_section(section)
        for key, (field_name, kind) in keys.items():
            v = values[field_name]
            if v is None:
                continue
            if kind == "hidden":
                cp.set(section, key, " ".join(str(s) for s in v))
            elif kind is bool:
                cp.set(section, key, "true" if v else "false")
            else:
                cp.set(section, key, str(v))
    if settings.hyper_overrides:
        cp.add_section("hyperparams")
        for name, fields in settings.hyper_overrides.items():
            for fld, v in fields.items():
                cp.set("hyperparams", f"{name}.{fld}", str(v))
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def band_sizes(settings: RunSettings) -> tuple[int, int, int]:
    """(bottom, top, inject) counts implied by the fractions.

    Bottom and inject round down, top rounds up. The 1e-9 nudges keep float
    products like 0.1 * 80 = 8.000000000000002 from crossing an integer.
    """
    p = settings.population_size
    bottom = math.floor(settings.worst_frac * p + 1e-9)
    top = math.ceil(settings.donor_frac * p - 1e-9) if settings.donor_frac > 0 else 0
    inject = math.floor(settings.inject_frac * p + 1e-9)
    return bottom, top, inject


def validate(settings: RunSettings) -> RunSettings:
    s = settings
    if s.runner not in RUNNERS:
        raise ValueError(f"unknown runner {s.runner!r}, available: {sorted(RUNNERS)}")
    if s.env not in ENV_BUILDERS:
        raise ValueError(f"unknown env {s.env!r}, available: {sorted(ENV_BUILDERS)}")
    schema = schema_for(s.algo)  # raises on unknown algo
    if s.hyper_overrides:
        schema.with_overrides(s.hyper_overrides)  # raises on unknown names/fields
    if s.total_budget < 0 or s.seed < 0:
        raise ValueError("total_budget and seed must be non-negative")
    if s.population_size < 0 or s.steps_per_agent < 0 or s.offspring < 0:
        raise ValueError("population size, steps per agent, and offspring must be >= 0")
    if s.num_cells < 1 or s.cvt_init_points < s.num_cells:
        raise ValueError("need num_cells >= 1 and cvt_init_points >= num_cells")
    if s.sigma_iso < 0 or s.sigma_line < 0:
        raise ValueError("isoline sigmas must be non-negative")
    if s.buffer_capacity < 1:
        raise ValueError("buffer_capacity must be positive")
    if s.checkpoint_every < 0:
        raise ValueError("checkpoint_every must be >= 0")
    for frac, name in ((s.worst_frac, "worst_frac"), (s.donor_frac, "donor_frac"),
                       (s.inject_frac, "inject_frac")):
        if not (0.0 <= frac < 1.0):
            raise ValueError(f"{name} must be in [0, 1)")

    if s.population_size > 0:
        bottom, top, inject = band_sizes(s)
        if bottom > 0 and top == 0:
            raise ValueError("worst_frac > 0 needs donor_frac large enough for one donor")
        middle = s.population_size - bottom - top
        if inject > middle:
            raise ValueError(
                f"inject_frac selects {inject} agents but the middle band holds {middle}"
            )
        if s.steps_per_agent == 0 and s.runner != "map-elites":
            raise ValueError(f"runner {s.runner} trains; steps_per_agent must be >= 1")

    if s.runner == "pbt":
        if s.offspring != 0 or s.inject_frac != 0.0:
            raise ValueError("runner pbt takes no offspring and no repertoire injections")
        if s.population_size < 1:
            raise ValueError("runner pbt needs a population")
    if s.runner == "map-elites":
        if s.population_size != 0 or s.steps_per_agent != 0:
            raise ValueError("runner map-elites is training-free: population 0, steps 0")
        if s.offspring < 1:
            raise ValueError("runner map-elites needs offspring >= 1")
    if s.runner == "pbt-me":
        if s.population_size < 1:
            raise ValueError("runner pbt-me needs a population")
    return s
