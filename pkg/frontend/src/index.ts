export { quantile, median, interpolate, unionGrid } from "./stats.js";
export { readMetricsLog, aggregateSeeds } from "./metricsLog.js";
export type { MetricsLog, BandedCurve } from "./metricsLog.js";
export { readHeatmapTable, parseTableName, compareSnapshots } from "./heatmapTable.js";
export type { HeatmapTable } from "./heatmapTable.js";
export { buildMetricsModel, renderMetricsFigure } from "./plotMetrics.js";
export type { MetricsFigureModel, SeriesSpec } from "./plotMetrics.js";
export { buildHeatmapsModel, renderHeatmapsFigure } from "./plotHeatmaps.js";
export type { HeatmapsFigureModel } from "./plotHeatmaps.js";
export { expandPattern, expandPatterns } from "./files.js";
