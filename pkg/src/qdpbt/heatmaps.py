"""Per-quantity tables from an archive snapshot, for plotting.

One comma-separated file per quantity: the elite's fitness plus every
hyperparameter the algorithm's schema samples from a range (fixed ones are
constant across the archive and carry no picture). Each row maps an occupied
cell's centroid coordinates to the stored value; empty cells are omitted, so
an empty archive gives header-only files.
"""
from __future__ import annotations

import csv
from pathlib import Path

from qdpbt.hyper import schema_for
from qdpbt.snapshot import Snapshot

HEADER = ("centroid_0", "centroid_1", "value")


def heatmap_quantities(algo: str) -> list[str]:
    return ["fitness"] + schema_for(algo).ranged_names()


def heatmap_path(out_dir: Path, snapshot_stem: str, quantity: str) -> Path:
    return out_dir / f"{snapshot_stem}_heatmap_{quantity}.csv"


def export_heatmaps(snap: Snapshot, out_dir, force: bool = False) -> list[Path]:
    """Write one table per quantity; returns the written paths.

    Existing files are refused unless force, so re-exports never silently
    overwrite anything.
    """
    if len(snap.meta["bd_bounds"]) != 2:
        raise ValueError(
            f"heatmap export needs a 2-d descriptor space, got {len(snap.meta['bd_bounds'])}"
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = snap.source.stem if snap.source else "snapshot"
    quantities = heatmap_quantities(snap.meta["algo"])
    paths = [heatmap_path(out, stem, q) for q in quantities]
    if not force:
        taken = [p for p in paths if p.exists()]
        if taken:
            raise FileExistsError(f"refusing to overwrite {taken[0]} (pass force)")

    cells = sorted(snap.raw_cells, key=lambda c: c["index"])
    points = snap.centroids.centroids
    for quantity, path in zip(quantities, paths):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(HEADER)
            for cell in cells:
                cx, cy = points[cell["index"]]
                value = cell["fitness"] if quantity == "fitness" else cell["hyperparams"][quantity]
                w.writerow([repr(float(cx)), repr(float(cy)), repr(float(value))])
    return paths
