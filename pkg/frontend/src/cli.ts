/** Command line dispatch: metric curve and archive map figures from run files. */
import { writeFileSync } from "node:fs";
import yargs from "yargs";
import { buildMetricsModel, renderMetricsFigure, SeriesSpec } from "./plotMetrics.js";
import { buildHeatmapsModel, renderHeatmapsFigure } from "./plotHeatmaps.js";

/** `label=glob[,glob...]`, or bare globs labeled by their pattern. */
export function parseSeriesArg(raw: string): SeriesSpec {
  const eq = raw.indexOf("=");
  if (eq <= 0) return { label: raw, patterns: raw.split(",") };
  return { label: raw.slice(0, eq), patterns: raw.slice(eq + 1).split(",") };
}

export function main(argv: string[]): number {
  try {
    buildParser(argv).parseSync();
    return 0;
  } catch (error) {
    console.error(`error: ${(error as Error).message}`);
    return 1;
  }
}

// fail() must throw: a fail handler that returns lets yargs run the command
// handler anyway, with the options it just rejected.
function buildParser(argv: string[]) {
  return yargs(argv)
    .scriptName("qd-plots")
    .exitProcess(false)
    .command(
      "plot-metrics",
      "Median curves with quartile bands from metrics.csv logs",
      (y) =>
        y
          .option("series", {
            type: "string",
            array: true,
            demandOption: true,
            describe: "label=glob[,glob...]; files under one label are seeds of one experiment",
          })
          .option("metric", {
            type: "string",
            array: true,
            default: ["max_fitness", "coverage", "qd_score"],
            describe: "metric columns to plot, one panel each",
          })
          .option("out", { type: "string", demandOption: true, describe: "output SVG path" }),
      (args) => {
        const model = buildMetricsModel(
          { series: args.series.map(parseSeriesArg), metrics: args.metric },
          (m) => console.warn(`warning: ${m}`),
        );
        writeFileSync(args.out, renderMetricsFigure(model));
        console.log(args.out);
      },
    )
    .command(
      "plot-heatmaps <tables...>",
      "Archive value maps, one column per snapshot, shared scale per quantity",
      (y) =>
        y
          .positional("tables", {
            type: "string",
            array: true,
            demandOption: true,
            describe: "exported <snapshot>_heatmap_<quantity>.csv files or globs",
          })
          .option("out", { type: "string", demandOption: true, describe: "output SVG path" }),
      (args) => {
        const model = buildHeatmapsModel(args.tables as string[]);
        writeFileSync(args.out, renderHeatmapsFigure(model));
        console.log(args.out);
      },
    )
    .demandCommand(1)
    .strict()
    .fail((message, error) => {
      throw error ?? new Error(message);
    });
}
