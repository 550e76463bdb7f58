"""The behavioral repertoire: one elite agent per tessellation cell.

Insertion is strictly greedy: an empty cell accepts any finite candidate, an
occupied cell only a strictly better one. The repertoire owns deep copies of
whatever it stores, so later training of a population slot never mutates an
elite.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from qdpbt.agents import Agent, copy_agent
from qdpbt.tessellation import CentroidSet, cell_index

log = logging.getLogger(__name__)


class InsertOutcome(Enum):
    INSERTED_EMPTY = "inserted_empty"
    REPLACED = "replaced"
    REJECTED_WORSE = "rejected_worse"
    REJECTED_NONFINITE = "rejected_nonfinite"


@dataclass
class EliteRecord:
    agent: Agent
    fitness: float
    descriptor: np.ndarray
    steps_at_insertion: int


@dataclass(frozen=True)
class QDMetrics:
    max_fitness: float
    coverage: float
    qd_score: float


class Repertoire:
    def __init__(self, centroids: CentroidSet, fitness_offset: float):
        self.centroids = centroids
        self.fitness_offset = float(fitness_offset)
        self.cells: dict[int, EliteRecord] = {}
        self.nonfinite_rejections = 0

    @property
    def num_cells(self) -> int:
        return self.centroids.num_cells

    def try_insert(
        self, agent: Agent, fitness: float, descriptor: np.ndarray, steps: int
    ) -> tuple[InsertOutcome, int]:
        """Offer a candidate; returns the outcome and the targeted cell index.

        Non-finite fitness or descriptor entries never enter the archive; they
        are counted and logged instead of poisoning a cell.
        """
        descriptor = np.asarray(descriptor, dtype=np.float64)
        if not (np.isfinite(fitness) and np.isfinite(descriptor).all()):
            self.nonfinite_rejections += 1
            log.warning(
                "rejected non-finite candidate: fitness=%r descriptor=%r", fitness, descriptor
            )
            return InsertOutcome.REJECTED_NONFINITE, -1
        idx = cell_index(self.centroids, descriptor)
        held = self.cells.get(idx)
        if held is None:
            self.cells[idx] = EliteRecord(copy_agent(agent), float(fitness), descriptor, steps)
            return InsertOutcome.INSERTED_EMPTY, idx
        if fitness > held.fitness:
            self.cells[idx] = EliteRecord(copy_agent(agent), float(fitness), descriptor, steps)
            return InsertOutcome.REPLACED, idx
        return InsertOutcome.REJECTED_WORSE, idx

    def occupied_indices(self) -> list[int]:
        return sorted(self.cells)

    def sample(self, count: int, rng: np.random.Generator) -> list[Agent]:
        """count agents drawn uniformly over occupied cells, as fresh copies."""
        occupied = self.occupied_indices()
        if not occupied:
            raise ValueError("cannot sample from an empty repertoire")
        picks = rng.integers(0, len(occupied), size=count)
        return [copy_agent(self.cells[occupied[j]].agent) for j in picks]

    def best(self) -> EliteRecord | None:
        if not self.cells:
            return None
        return max(self.cells.values(), key=lambda r: r.fitness)

    def metrics(self) -> QDMetrics:
        if not self.cells:
            return QDMetrics(float("nan"), 0.0, 0.0)
        # summed in cell-index order so the score is identical however the
        # same archive contents were arrived at
        fits = [self.cells[i].fitness for i in self.occupied_indices()]
        qd = sum(f + self.fitness_offset for f in fits)
        return QDMetrics(max(fits), len(fits) / self.num_cells, qd)
