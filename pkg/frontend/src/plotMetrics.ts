/** Metric curve figures: one panel per metric, banded curve per series. */
import { aggregateSeeds, BandedCurve, MetricsLog, readMetricsLog } from "./metricsLog.js";
import { expandPatterns } from "./files.js";
import {
  bandPath,
  el,
  formatTick,
  niceTicks,
  polylinePoints,
  round,
  SERIES_COLORS,
  svgDocument,
  text,
} from "./svg.js";

export interface SeriesSpec {
  /** legend label; files sharing it aggregate as seeds of one experiment */
  label: string;
  patterns: string[];
}

export interface MetricsFigureRequest {
  series: SeriesSpec[];
  metrics: string[];
  outPath: string;
}

export interface MetricsFigureModel {
  metrics: string[];
  series: { label: string; files: string[]; curves: Map<string, BandedCurve> }[];
}

/** Resolve files, check headers, and aggregate every (series, metric) pair. */
export function buildMetricsModel(
  request: Pick<MetricsFigureRequest, "series" | "metrics">,
  onWarn: (message: string) => void = (m) => console.warn(m),
): MetricsFigureModel {
  if (request.series.length === 0) throw new Error("no input series given");
  if (request.metrics.length === 0) throw new Error("no metrics requested");
  const series = request.series.map(({ label, patterns }) => {
    const files = expandPatterns(patterns);
    if (files.length === 0) {
      throw new Error(`series ${label}: no files match ${patterns.join(", ")}`);
    }
    const logs: MetricsLog[] = files.map(readMetricsLog);
    const curves = new Map<string, BandedCurve>();
    for (const metric of request.metrics) {
      curves.set(metric, aggregateSeeds(logs, metric, (m) => onWarn(`series ${label}: ${m}`)));
    }
    return { label, files, curves };
  });
  return { metrics: request.metrics, series };
}

const PANEL = { width: 620, height: 300 };
const MARGIN = { left: 72, right: 18, top: 34, bottom: 46 };

export function renderMetricsFigure(model: MetricsFigureModel): string {
  const panels = model.metrics.map((metric, i) =>
    el("g", { transform: `translate(0,${i * PANEL.height})` }, renderPanel(model, metric)),
  );
  return svgDocument(PANEL.width, PANEL.height * model.metrics.length, panels);
}

function renderPanel(model: MetricsFigureModel, metric: string): string[] {
  const inner = {
    x: MARGIN.left,
    y: MARGIN.top,
    w: PANEL.width - MARGIN.left - MARGIN.right,
    h: PANEL.height - MARGIN.top - MARGIN.bottom,
  };
  const curves = model.series.map((s) => s.curves.get(metric)!);
  const xMin = Math.min(...curves.map((c) => c.grid[0]));
  const xMax = Math.max(...curves.map((c) => c.grid[c.grid.length - 1]));
  let yMin = Infinity;
  let yMax = -Infinity;
  for (const c of curves) {
    const lows = c.band ? c.band.lower : c.median;
    const highs = c.band ? c.band.upper : c.median;
    yMin = Math.min(yMin, ...lows);
    yMax = Math.max(yMax, ...highs);
  }
  if (yMax === yMin) {
    yMax += 1;
    yMin -= 1;
  }
  const pad = 0.05 * (yMax - yMin);
  yMin -= pad;
  yMax += pad;

  const sx = (v: number) => inner.x + ((v - xMin) / (xMax - xMin || 1)) * inner.w;
  const sy = (v: number) => inner.y + inner.h - ((v - yMin) / (yMax - yMin)) * inner.h;

  const parts: string[] = [];
  for (const tick of niceTicks(yMin, yMax)) {
    const y = sy(tick);
    parts.push(
      el("line", { x1: inner.x, x2: inner.x + inner.w, y1: round(y), y2: round(y), stroke: "#e0e0e0" }),
      text(inner.x - 8, y + 4, formatTick(tick), { "text-anchor": "end", "font-size": 11 }),
    );
  }
  for (const tick of niceTicks(xMin, xMax, 6)) {
    const x = sx(tick);
    parts.push(
      el("line", { x1: round(x), x2: round(x), y1: inner.y + inner.h, y2: inner.y + inner.h + 5, stroke: "#444444" }),
      text(x, inner.y + inner.h + 20, formatTick(tick), { "text-anchor": "middle", "font-size": 11 }),
    );
  }
  parts.push(
    el("rect", { x: inner.x, y: inner.y, width: inner.w, height: inner.h, fill: "none", stroke: "#444444" }),
  );

  model.series.forEach((s, k) => {
    const c = s.curves.get(metric)!;
    const color = SERIES_COLORS[k % SERIES_COLORS.length];
    const xs = c.grid.map(sx);
    if (c.band) {
      parts.push(
        el("path", {
          d: bandPath(xs, c.band.upper.map(sy), c.band.lower.map(sy)),
          fill: color,
          "fill-opacity": 0.18,
          stroke: "none",
        }),
      );
    }
    parts.push(
      el("polyline", {
        points: polylinePoints(xs, c.median.map(sy)),
        fill: "none",
        stroke: color,
        "stroke-width": 1.8,
      }),
    );
    const ly = inner.y + 16 + 16 * k;
    parts.push(
      el("line", { x1: inner.x + 10, x2: inner.x + 30, y1: ly - 4, y2: ly - 4, stroke: color, "stroke-width": 2 }),
      text(inner.x + 36, ly, `${s.label} (${c.seeds} seed${c.seeds === 1 ? "" : "s"})`, { "font-size": 11 }),
    );
  });

  parts.push(
    text(inner.x + inner.w / 2, 18, metric, { "text-anchor": "middle", "font-size": 13, "font-weight": "bold" }),
    text(inner.x + inner.w / 2, PANEL.height - 10, "budget_steps", { "text-anchor": "middle", "font-size": 11 }),
  );
  return parts;
}
