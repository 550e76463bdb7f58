/** Reading metric logs and aggregating seed groups into banded curves. */
import { readFileSync } from "node:fs";
import Papa from "papaparse";
import { interpolate, quantile, unionGrid } from "./stats.js";

export interface MetricsLog {
  path: string;
  /** column name -> values, row-aligned with budget */
  columns: Map<string, number[]>;
  budget: number[];
}

const BUDGET_COLUMN = "budget_steps";

export function readMetricsLog(filePath: string): MetricsLog {
  const text = readFileSync(filePath, "utf-8");
  const parsed = Papa.parse<Record<string, number>>(text.trim(), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new Error(`${filePath}: ${first.message} (row ${first.row})`);
  }
  const fields = parsed.meta.fields ?? [];
  if (!fields.includes(BUDGET_COLUMN)) {
    throw new Error(`${filePath}: no ${BUDGET_COLUMN} column (found: ${fields.join(", ")})`);
  }
  const columns = new Map<string, number[]>();
  for (const field of fields) {
    columns.set(
      field,
      parsed.data.map((row) => row[field]),
    );
  }
  return { path: filePath, columns, budget: columns.get(BUDGET_COLUMN)! };
}

export interface BandedCurve {
  /** shared budget grid */
  grid: number[];
  median: number[];
  /** quartile band; absent for a single seed */
  band?: { lower: number[]; upper: number[] };
  seeds: number;
}

/**
 * Median and quartile band of one metric across seed logs.
 *
 * Seeds logged on different budget grids are linearly interpolated onto the
 * sorted union of all grids; onWarn hears about it once per aggregation.
 */
export function aggregateSeeds(
  logs: MetricsLog[],
  metric: string,
  onWarn: (message: string) => void = () => {},
): BandedCurve {
  if (logs.length === 0) throw new Error("aggregateSeeds needs at least one log");
  for (const log of logs) {
    if (!log.columns.has(metric)) {
      throw new Error(
        `${log.path}: no metric ${metric} (found: ${[...log.columns.keys()].join(", ")})`,
      );
    }
  }
  const grids = logs.map((log) => log.budget);
  const grid = unionGrid(grids);
  const aligned = grids.every(
    (g) => g.length === grid.length && g.every((x, i) => x === grid[i]),
  );
  if (!aligned) {
    onWarn(
      `budget grids differ across ${logs.length} seed logs; interpolating onto their union`,
    );
  }

  const perSeed = logs.map((log) => {
    const ys = log.columns.get(metric)!;
    if (aligned) return ys;
    return grid.map((x) => interpolate(log.budget, ys, x));
  });

  const at = (i: number) => perSeed.map((ys) => ys[i]);
  const med = grid.map((_, i) => quantile(at(i), 0.5));
  if (logs.length === 1) {
    return { grid, median: med, seeds: 1 };
  }
  return {
    grid,
    median: med,
    band: {
      lower: grid.map((_, i) => quantile(at(i), 0.25)),
      upper: grid.map((_, i) => quantile(at(i), 0.75)),
    },
    seeds: logs.length,
  };
}
