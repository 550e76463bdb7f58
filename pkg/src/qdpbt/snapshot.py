"""Repertoire snapshots: one self-describing JSON file per checkpoint.

Layout:

    {
      "meta": {"env", "algo", "hidden", "state_dim", "action_dim",
               "bd_bounds", "num_cells", "phi_order"},
      "fitness_offset": float,
      "budget_consumed": int,
      "centroids": [[float, ...], ...],
      "cells": [{"index", "fitness", "descriptor", "steps_at_insertion",
                 "hyperparams", "theta_blob", "phi_blob"}, ...]
    }

Parameter blobs are little-endian float32 in base64; phi components are
concatenated in the order named by meta.phi_order. Floats go through repr,
so a load-save cycle is byte-identical and restored agents replay exactly.
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qdpbt.agents import PHI_ORDER, Agent, make_nets
from qdpbt.repertoire import EliteRecord, Repertoire
from qdpbt.tessellation import CentroidSet


def _encode(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode("ascii")


def _decode(blob: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(blob), dtype="<f4").astype(np.float32)


def snapshot_dict(repertoire: Repertoire, budget_consumed: int, meta: dict) -> dict:
    algo = meta["algo"]
    cells = []
    for idx in repertoire.occupied_indices():
        rec = repertoire.cells[idx]
        ag = rec.agent
        phi_flat = np.concatenate([ag.phi[k] for k in PHI_ORDER[algo]])
        cells.append(
            {
                "index": idx,
                "fitness": rec.fitness,
                "descriptor": [float(v) for v in rec.descriptor],
                "steps_at_insertion": int(rec.steps_at_insertion),
                "hyperparams": {k: float(v) for k, v in ag.h.items()},
                "theta_blob": _encode(ag.theta),
                "phi_blob": _encode(phi_flat),
            }
        )
    return {
        "meta": {**meta, "phi_order": list(PHI_ORDER[algo])},
        "fitness_offset": repertoire.fitness_offset,
        "budget_consumed": int(budget_consumed),
        "centroids": [[float(v) for v in row] for row in repertoire.centroids.centroids],
        "cells": cells,
    }


def save_snapshot(path, repertoire: Repertoire, budget_consumed: int, meta: dict) -> None:
    data = snapshot_dict(repertoire, budget_consumed, meta)
    Path(path).write_text(json.dumps(data, separators=(",", ":")) + "\n")


@dataclass
class Snapshot:
    meta: dict
    fitness_offset: float
    budget_consumed: int
    centroids: CentroidSet
    raw_cells: list[dict]
    source: Path | None = None  # file this was loaded from, if any

    def agents(self) -> list[tuple[dict, Agent]]:
        """(cell record, rebuilt agent) pairs in cell-index order."""
        meta = self.meta
        nets = make_nets(
            meta["algo"], int(meta["state_dim"]), int(meta["action_dim"]), tuple(meta["hidden"])
        )
        declared = list(meta["phi_order"])
        if declared != list(PHI_ORDER[meta["algo"]]):
            raise ValueError(f"unsupported phi order {declared} for {meta['algo']}")
        sizes = [nets.component_size(k) for k in declared]
        out = []
        for cell in self.raw_cells:
            theta = _decode(cell["theta_blob"])
            if theta.shape[0] != nets.actor.num_params:
                raise ValueError(
                    f"theta blob holds {theta.shape[0]} values, net needs {nets.actor.num_params}"
                )
            phi_flat = _decode(cell["phi_blob"])
            if phi_flat.shape[0] != sum(sizes):
                raise ValueError(
                    f"phi blob holds {phi_flat.shape[0]} values, nets need {sum(sizes)}"
                )
            parts = np.split(phi_flat, np.cumsum(sizes)[:-1])
            phi = {k: parts[i].copy() for i, k in enumerate(declared)}
            out.append((cell, Agent(nets=nets, theta=theta, phi=phi, h=dict(cell["hyperparams"]))))
        return out


def load_snapshot(path) -> Snapshot:
    data = json.loads(Path(path).read_text())
    meta = data["meta"]
    centroids = CentroidSet(
        centroids=np.array(data["centroids"], dtype=np.float64),
        bounds=np.array(meta["bd_bounds"], dtype=np.float64),
    )
    if centroids.num_cells != int(meta["num_cells"]):
        raise ValueError(
            f"snapshot declares {meta['num_cells']} cells but carries {centroids.num_cells}"
        )
    return Snapshot(
        meta=meta,
        fitness_offset=float(data["fitness_offset"]),
        budget_consumed=int(data["budget_consumed"]),
        centroids=centroids,
        raw_cells=data["cells"],
        source=Path(path),
    )


def restore_repertoire(snap: Snapshot) -> Repertoire:
    """Rebuild the archive exactly as saved, without re-running insertion."""
    rep = Repertoire(snap.centroids, snap.fitness_offset)
    for cell, agent in snap.agents():
        rep.cells[int(cell["index"])] = EliteRecord(
            agent=agent,
            fitness=float(cell["fitness"]),
            descriptor=np.array(cell["descriptor"], dtype=np.float64),
            steps_at_insertion=int(cell["steps_at_insertion"]),
        )
    return rep
