import { existsSync, mkdirSync, mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { afterAll, describe, expect, it } from "vitest";
import { compareSnapshots, parseTableName, readHeatmapTable } from "../src/heatmapTable.js";
import { buildHeatmapsModel, renderHeatmapsFigure } from "../src/plotHeatmaps.js";

const root = mkdtempSync(path.join(tmpdir(), "qd-plots-heat-"));
afterAll(() => rmSync(root, { recursive: true, force: true }));

const HEADER = "centroid_0,centroid_1,value";

function writeTable(
  dir: string,
  snapshot: string,
  quantity: string,
  rows: [number, number, number][],
): string {
  const file = path.join(dir, `${snapshot}_heatmap_${quantity}.csv`);
  writeFileSync(file, [HEADER, ...rows.map((r) => r.join(","))].join("\n") + "\n");
  return file;
}

/** Four snapshots by two quantities with hand-picked values. */
function figureDir(): string {
  const dir = path.join(root, "figure");
  if (!existsSync(dir)) {
    mkdirSync(dir, { recursive: true });
    const stems = ["snap_100", "snap_200", "snap_300", "snap_final"];
    stems.forEach((stem, i) => {
      writeTable(dir, stem, "fitness", [
        [0.1, 0.2, 1 + i],
        [0.8, 0.9, 5 + i],
      ]);
      writeTable(dir, stem, "discount", [
        [0.1, 0.2, 0.9 + 0.01 * i],
        [0.8, 0.9, 0.95],
      ]);
    });
  }
  return dir;
}

describe("parseTableName", () => {
  it("splits the snapshot stem from the quantity", () => {
    expect(parseTableName("/x/snapshot_000000494000_heatmap_fitness.csv")).toEqual({
      snapshot: "snapshot_000000494000",
      quantity: "fitness",
    });
    expect(parseTableName("snap_final_heatmap_exploration_noise.csv")).toEqual({
      snapshot: "snap_final",
      quantity: "exploration_noise",
    });
  });

  it("rejects names without the heatmap infix", () => {
    expect(() => parseTableName("/x/metrics.csv")).toThrow(/_heatmap_/);
  });
});

describe("compareSnapshots", () => {
  it("orders numeric stems ascending with non-numeric stems last", () => {
    const stems = ["snap_final", "snap_1400", "snap_200", "snap_80"];
    expect([...stems].sort(compareSnapshots)).toEqual([
      "snap_80",
      "snap_200",
      "snap_1400",
      "snap_final",
    ]);
  });
});

describe("readHeatmapTable", () => {
  it("keeps point values verbatim and in file order", () => {
    const dir = path.join(root, "verbatim");
    mkdirSync(dir, { recursive: true });
    const file = writeTable(dir, "snap_5", "fitness", [
      [0.25, 0.75, -3.25],
      [0.5, 0.5, 4.125],
    ]);
    const table = readHeatmapTable(file);
    expect(table.snapshot).toBe("snap_5");
    expect(table.quantity).toBe("fitness");
    expect(table.points).toEqual([
      { x: 0.25, y: 0.75, value: -3.25 },
      { x: 0.5, y: 0.5, value: 4.125 },
    ]);
  });

  it("rejects a table missing a coordinate column", () => {
    const dir = path.join(root, "badcols");
    mkdirSync(dir, { recursive: true });
    const file = path.join(dir, "snap_1_heatmap_fitness.csv");
    writeFileSync(file, "centroid_0,value\n0.1,2\n");
    expect(() => readHeatmapTable(file)).toThrow(/centroid_1/);
  });
});

describe("buildHeatmapsModel", () => {
  it("lays out one column per snapshot and one row per quantity", () => {
    const dir = figureDir();
    const model = buildHeatmapsModel([path.join(dir, "*_heatmap_*.csv")]);
    expect(model.snapshots).toEqual(["snap_100", "snap_200", "snap_300", "snap_final"]);
    expect(model.rows.map((r) => r.quantity)).toEqual(["fitness", "discount"]);
    for (const row of model.rows) {
      expect(row.panels).toHaveLength(4);
      expect(row.panels.map((p) => p.snapshot)).toEqual(model.snapshots);
    }
  });

  it("shares one color scale per quantity spanning every snapshot", () => {
    const dir = figureDir();
    const model = buildHeatmapsModel([path.join(dir, "*_heatmap_*.csv")]);
    const fitness = model.rows[0];
    // min over snap_100, max over snap_final
    expect(fitness.scale).toEqual({ min: 1, max: 8 });
    const discount = model.rows[1];
    expect(discount.scale).toEqual({ min: 0.9, max: 0.95 });
  });

  it("panel points equal the exported file rows exactly", () => {
    const dir = figureDir();
    const model = buildHeatmapsModel([path.join(dir, "*_heatmap_*.csv")]);
    const panel = model.rows[0].panels[2];
    const table = readHeatmapTable(path.join(dir, "snap_300_heatmap_fitness.csv"));
    expect(panel.points).toEqual(table.points);
  });

  it("keeps the grid of panels when one table is absent", () => {
    const dir = path.join(root, "sparse");
    mkdirSync(dir, { recursive: true });
    writeTable(dir, "snap_1", "fitness", [[0.5, 0.5, 1]]);
    writeTable(dir, "snap_2", "fitness", [[0.5, 0.5, 2]]);
    writeTable(dir, "snap_2", "discount", [[0.5, 0.5, 0.9]]);
    const model = buildHeatmapsModel([path.join(dir, "*.csv")]);
    const discount = model.rows.find((r) => r.quantity === "discount")!;
    expect(discount.panels.map((p) => p.points.length)).toEqual([0, 1]);
  });

  it("rejects patterns matching nothing", () => {
    expect(() => buildHeatmapsModel([path.join(root, "void", "*.csv")])).toThrow(/no files match/);
  });
});

describe("renderHeatmapsFigure", () => {
  it("draws every archive point as a mark and labels columns by budget", () => {
    const dir = figureDir();
    const model = buildHeatmapsModel([path.join(dir, "*_heatmap_*.csv")]);
    const svg = renderHeatmapsFigure(model);
    expect(svg).toContain("<svg");
    // 4 snapshots x 2 quantities x 2 points each
    expect((svg.match(/<circle /g) ?? []).length).toBe(16);
    expect(svg).toContain("100 steps");
    expect(svg).toContain("snap_final");
  });

  it("annotates an empty archive table instead of leaving a blank panel", () => {
    const dir = path.join(root, "empty");
    mkdirSync(dir, { recursive: true });
    const file = path.join(dir, "snap_0_heatmap_fitness.csv");
    writeFileSync(file, HEADER + "\n");
    const model = buildHeatmapsModel([file]);
    expect(model.rows[0].panels[0].points).toEqual([]);
    expect(model.rows[0].scale).toBeNull();
    const svg = renderHeatmapsFigure(model);
    expect(svg).toContain("empty archive");
    expect(svg).not.toContain("<circle");
  });
});
