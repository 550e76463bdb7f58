/** Reading exported archive tables and grouping them into figure rows. */
import { readFileSync } from "node:fs";
import * as path from "node:path";
import Papa from "papaparse";

export interface HeatmapTable {
  path: string;
  /** snapshot identity, parsed from the file name */
  snapshot: string;
  quantity: string;
  points: { x: number; y: number; value: number }[];
}

const NAME_RE = /^(.+)_heatmap_(.+)\.csv$/;

/** Split `{snapshot}_heatmap_{quantity}.csv` into its two parts. */
export function parseTableName(filePath: string): { snapshot: string; quantity: string } {
  const base = path.basename(filePath);
  const m = NAME_RE.exec(base);
  if (!m) {
    throw new Error(`${filePath}: expected a <snapshot>_heatmap_<quantity>.csv name`);
  }
  return { snapshot: m[1], quantity: m[2] };
}

export function readHeatmapTable(filePath: string): HeatmapTable {
  const { snapshot, quantity } = parseTableName(filePath);
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
  for (const needed of ["centroid_0", "centroid_1", "value"]) {
    if (!fields.includes(needed)) {
      throw new Error(`${filePath}: no ${needed} column (found: ${fields.join(", ")})`);
    }
  }
  return {
    path: filePath,
    snapshot,
    quantity,
    points: parsed.data.map((row) => ({
      x: row["centroid_0"],
      y: row["centroid_1"],
      value: row["value"],
    })),
  };
}

/**
 * Order snapshot labels for the column axis: numeric budget stems ascending,
 * anything non-numeric (the final snapshot) after them, alphabetically.
 */
export function compareSnapshots(a: string, b: string): number {
  const num = (s: string) => {
    const m = /(\d+)$/.exec(s);
    return m ? Number(m[1]) : null;
  };
  const na = num(a);
  const nb = num(b);
  if (na !== null && nb !== null) return na - nb;
  if (na !== null) return -1;
  if (nb !== null) return 1;
  return a < b ? -1 : a > b ? 1 : 0;
}
