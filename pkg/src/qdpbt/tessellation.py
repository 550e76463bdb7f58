"""Centroidal Voronoi tessellation of the behavior-descriptor space.

Cells are defined by a fixed set of centroids obtained from k-means (Lloyd's
algorithm) over uniform samples of the descriptor box. The centroid set is
immutable once built; lookups clip the descriptor into the box and take the
nearest centroid in Euclidean distance, lowest index on ties.

Distances are computed literally as sums of squared differences rather than
via the dot-product expansion, so a lookup agrees bit-for-bit with a naive
linear scan.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LLOYD_MAX_ITERS = 200


@dataclass(frozen=True)
class CentroidSet:
    """Immutable centroids plus the descriptor bounds they tessellate."""

    centroids: np.ndarray  # (num_cells, bd_dim) float64
    bounds: np.ndarray  # (bd_dim, 2) float64, [:, 0] low, [:, 1] high

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.centroids, dtype=np.float64))
        b = np.ascontiguousarray(np.asarray(self.bounds, dtype=np.float64))
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError(f"centroids must be (num_cells, bd_dim), got {c.shape}")
        if b.shape != (c.shape[1], 2):
            raise ValueError(f"bounds must be ({c.shape[1]}, 2), got {b.shape}")
        if np.any(b[:, 0] >= b[:, 1]):
            raise ValueError("each bounds row needs low < high")
        c.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "bounds", b)

    @property
    def num_cells(self) -> int:
        return self.centroids.shape[0]

    @property
    def bd_dim(self) -> int:
        return self.centroids.shape[1]


def _nearest(points: np.ndarray, centroids: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Index of the nearest centroid per point, literal squared distances.

    Accumulating one coordinate at a time reproduces sum(axis=2) bitwise for
    the short descriptor axis while never materializing the 3-d temporary.
    """
    out = np.empty(points.shape[0], dtype=np.int64)
    for start in range(0, points.shape[0], chunk):
        block = points[start : start + chunk]
        d2 = np.square(block[:, 0, None] - centroids[None, :, 0])
        for j in range(1, points.shape[1]):
            d2 += np.square(block[:, j, None] - centroids[None, :, j])
        out[start : start + chunk] = np.argmin(d2, axis=1)
    return out


def cell_index(cs: CentroidSet, descriptor: np.ndarray) -> int:
    """Cell id for one descriptor. Out-of-bounds descriptors are clipped."""
    d = np.asarray(descriptor, dtype=np.float64)
    if d.shape != (cs.bd_dim,):
        raise ValueError(f"descriptor of shape ({cs.bd_dim},) expected, got {d.shape}")
    d = np.clip(d, cs.bounds[:, 0], cs.bounds[:, 1])
    d2 = np.square(cs.centroids - d[None, :]).sum(axis=1)
    return int(np.argmin(d2))


def build_cvt(
    num_cells: int,
    num_init_points: int,
    bounds,
    seed: int | np.random.Generator,
    max_iters: int = LLOYD_MAX_ITERS,
    with_history: bool = False,
):
    """Lloyd's algorithm over uniform samples of the descriptor box.

    Stops at an assignment fixpoint or after max_iters sweeps. Empty clusters
    are re-seeded onto the samples currently farthest from their assigned
    centroid, worst first, which never raises the quantization error.
    Deterministic in (seed, shapes): same inputs give bitwise equal centroids.
    """
    b = np.asarray(bounds, dtype=np.float64)
    if b.ndim != 2 or b.shape[1] != 2:
        raise ValueError(f"bounds must be (bd_dim, 2), got {b.shape}")
    if num_cells < 1:
        raise ValueError("num_cells must be positive")
    if num_init_points < num_cells:
        raise ValueError(
            f"need at least as many init points ({num_init_points}) as cells ({num_cells})"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    dim = b.shape[0]
    samples = rng.uniform(b[:, 0], b[:, 1], size=(num_init_points, dim))

    centroids = samples[:num_cells].copy()
    assign = _nearest(samples, centroids)
    errors: list[float] = []
    for _ in range(max_iters):
        counts = np.bincount(assign, minlength=num_cells)
        sums = np.zeros((num_cells, dim))
        np.add.at(sums, assign, samples)
        occupied = counts > 0
        centroids[occupied] = sums[occupied] / counts[occupied, None]

        empty = np.flatnonzero(~occupied)
        if empty.size:
            d2 = np.square(samples - centroids[assign]).sum(axis=1)
            worst = np.argsort(-d2, kind="stable")[: empty.size]
            centroids[empty] = samples[worst]

        new_assign = _nearest(samples, centroids)
        errors.append(float(np.square(samples - centroids[new_assign]).sum()))
        if np.array_equal(new_assign, assign):
            assign = new_assign
            break
        assign = new_assign

    cs = CentroidSet(centroids=centroids, bounds=b)
    if with_history:
        return cs, errors
    return cs


def save_centroids(cs: CentroidSet, path) -> None:
    """Plain-text table, one centroid per line, space-separated coordinates."""
    lines = [" ".join(repr(float(v)) for v in row) for row in cs.centroids]
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_centroids(path, bounds) -> CentroidSet:
    """Read a centroid table written by save_centroids (or by hand)."""
    rows = []
    width = None
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            vals = [float(tok) for tok in line.split()]
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ValueError(f"{path}: line {ln} has {len(vals)} columns, expected {width}")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no centroids found")
    return CentroidSet(centroids=np.array(rows, dtype=np.float64), bounds=bounds)
