/** Archive value maps: rows of quantities, one column per snapshot. */
import { compareSnapshots, HeatmapTable, readHeatmapTable } from "./heatmapTable.js";
import { expandPatterns } from "./files.js";
import { el, rampColor, round, svgDocument, text } from "./svg.js";

export interface HeatmapsFigureRequest {
  patterns: string[];
  outPath: string;
}

export interface HeatmapPanel {
  snapshot: string;
  /** point values verbatim from the table; empty archives have none */
  points: { x: number; y: number; value: number }[];
}

export interface HeatmapRow {
  quantity: string;
  /** shared color domain for the whole row, over every snapshot's values */
  scale: { min: number; max: number } | null;
  panels: HeatmapPanel[];
}

export interface HeatmapsFigureModel {
  snapshots: string[];
  rows: HeatmapRow[];
  /** shared centroid-coordinate domain across all tables */
  domain: { xMin: number; xMax: number; yMin: number; yMax: number };
}

/** Group tables one row per quantity with a column for every snapshot. */
export function buildHeatmapsModel(patterns: string[]): HeatmapsFigureModel {
  const files = expandPatterns(patterns);
  if (files.length === 0) throw new Error(`no files match ${patterns.join(", ")}`);
  const tables = files.map(readHeatmapTable);

  const snapshots = [...new Set(tables.map((t) => t.snapshot))].sort(compareSnapshots);
  const quantities = [...new Set(tables.map((t) => t.quantity))].sort((a, b) =>
    a === "fitness" ? -1 : b === "fitness" ? 1 : a < b ? -1 : a > b ? 1 : 0,
  );
  const byKey = new Map<string, HeatmapTable>();
  for (const t of tables) byKey.set(`${t.quantity}/${t.snapshot}`, t);

  let xMin = Infinity;
  let xMax = -Infinity;
  let yMin = Infinity;
  let yMax = -Infinity;
  for (const t of tables) {
    for (const p of t.points) {
      xMin = Math.min(xMin, p.x);
      xMax = Math.max(xMax, p.x);
      yMin = Math.min(yMin, p.y);
      yMax = Math.max(yMax, p.y);
    }
  }
  if (!Number.isFinite(xMin)) {
    xMin = 0;
    xMax = 1;
    yMin = 0;
    yMax = 1;
  }

  const rows: HeatmapRow[] = quantities.map((quantity) => {
    const panels: HeatmapPanel[] = snapshots.map((snapshot) => {
      const table = byKey.get(`${quantity}/${snapshot}`);
      return { snapshot, points: table ? table.points : [] };
    });
    const values = panels.flatMap((p) => p.points.map((pt) => pt.value));
    const scale =
      values.length > 0 ? { min: Math.min(...values), max: Math.max(...values) } : null;
    return { quantity, scale, panels };
  });

  return { snapshots, rows, domain: { xMin, xMax, yMin, yMax } };
}

const CELL = 190;
const CELL_PAD = 12;
const HEADER = 30;
const ROW_LABEL = 26;
const COLORBAR = 74;

export function renderHeatmapsFigure(model: HeatmapsFigureModel): string {
  const cols = model.snapshots.length;
  const width = ROW_LABEL + cols * (CELL + CELL_PAD) + COLORBAR;
  const height = HEADER + model.rows.length * (CELL + CELL_PAD);

  const parts: string[] = [];
  model.snapshots.forEach((snapshot, j) => {
    const x = ROW_LABEL + j * (CELL + CELL_PAD) + CELL / 2;
    parts.push(text(x, 20, snapshotLabel(snapshot), { "text-anchor": "middle", "font-size": 12 }));
  });

  model.rows.forEach((row, i) => {
    const top = HEADER + i * (CELL + CELL_PAD);
    parts.push(
      text(12, top + CELL / 2, row.quantity, {
        "text-anchor": "middle",
        "font-size": 12,
        transform: `rotate(-90 12 ${round(top + CELL / 2)})`,
      }),
    );
    row.panels.forEach((panel, j) => {
      const left = ROW_LABEL + j * (CELL + CELL_PAD);
      parts.push(...renderPanel(panel, row.scale, model.domain, left, top));
    });
    parts.push(...renderColorbar(row, ROW_LABEL + cols * (CELL + CELL_PAD) + 10, top));
  });

  return svgDocument(width, height, parts);
}

function renderPanel(
  panel: HeatmapPanel,
  scale: { min: number; max: number } | null,
  domain: HeatmapsFigureModel["domain"],
  left: number,
  top: number,
): string[] {
  const parts = [
    el("rect", { x: left, y: top, width: CELL, height: CELL, fill: "#fafafa", stroke: "#888888" }),
  ];
  if (panel.points.length === 0 || scale === null) {
    parts.push(
      text(left + CELL / 2, top + CELL / 2, "empty archive", {
        "text-anchor": "middle",
        "font-size": 11,
        fill: "#888888",
      }),
    );
    return parts;
  }
  const padX = 0.04 * (domain.xMax - domain.xMin || 1);
  const padY = 0.04 * (domain.yMax - domain.yMin || 1);
  const sx = (v: number) =>
    left + ((v - domain.xMin + padX) / (domain.xMax - domain.xMin + 2 * padX)) * CELL;
  // larger descriptor coordinates sit higher up, as on a map
  const sy = (v: number) =>
    top + CELL - ((v - domain.yMin + padY) / (domain.yMax - domain.yMin + 2 * padY)) * CELL;
  const span = scale.max - scale.min;
  for (const p of panel.points) {
    const t = span > 0 ? (p.value - scale.min) / span : 0.5;
    parts.push(
      el("circle", { cx: round(sx(p.x)), cy: round(sy(p.y)), r: 3.4, fill: rampColor(t) }),
    );
  }
  return parts;
}

function renderColorbar(row: HeatmapRow, left: number, top: number): string[] {
  if (row.scale === null) return [];
  const steps = 24;
  const barHeight = CELL - 24;
  const barTop = top + 12;
  const parts: string[] = [];
  for (let s = 0; s < steps; s++) {
    const t = 1 - s / (steps - 1);
    parts.push(
      el("rect", {
        x: left,
        y: round(barTop + (s * barHeight) / steps),
        width: 12,
        height: Math.ceil(barHeight / steps),
        fill: rampColor(t),
      }),
    );
  }
  parts.push(
    el("rect", { x: left, y: barTop, width: 12, height: barHeight, fill: "none", stroke: "#888888" }),
    text(left + 16, barTop + 8, shortValue(row.scale.max), { "font-size": 10 }),
    text(left + 16, barTop + barHeight, shortValue(row.scale.min), { "font-size": 10 }),
  );
  return parts;
}

function snapshotLabel(snapshot: string): string {
  const m = /(\d+)$/.exec(snapshot);
  if (!m) return snapshot;
  return `${Number(m[1]).toLocaleString("en-US")} steps`;
}

function shortValue(v: number): string {
  if (v === 0) return "0";
  const abs = Math.abs(v);
  if (abs >= 100) return v.toFixed(0);
  if (abs >= 0.01) return String(Math.round(v * 1000) / 1000);
  return v.toExponential(1);
}
