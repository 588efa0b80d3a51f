/**
 * Error-versus-step-size convergence figure on log-log axes, with a
 * sqrt(dt) guide line anchored at the coarsest step.
 *
 * Usage: node plot_convergence.js <convergence.csv> <out.svg>
 *
 * convergence.csv columns: dt, abs_error (stderr optional).  At least two
 * distinct dt values are required; identical errors across all dt draw a
 * flat line and print a warning.
 */

import { writeFileSync } from "fs";
import { CsvError, column, readTable, requireColumns } from "./csv";
import { renderChart, Series } from "./svg";

export function buildConvergence(csvPath: string): string {
  const t = readTable(csvPath);
  requireColumns(t, ["dt", "abs_error"], csvPath);
  const dt = column(t, "dt");
  const err = column(t, "abs_error");
  const se = t.columns.has("stderr") ? column(t, "stderr") : undefined;
  if (new Set(dt).size < 2) {
    throw new CsvError(`${csvPath}: need at least two distinct dt values`);
  }
  const notes: string[] = [];
  if (new Set(err).size === 1) {
    console.warn(`warning: identical errors at every dt; flat line rendered`);
    notes.push("identical errors at all dt");
  }
  const order = dt.map((_, i) => i).sort((a, b) => dt[a] - dt[b]);
  const xs = order.map((i) => dt[i]);
  const ys = order.map((i) => Math.max(err[i], 1e-300));
  const es = se ? order.map((i) => se[i]) : undefined;
  const anchor = ys[ys.length - 1] > 0 ? ys[ys.length - 1] : 1e-3;
  const guide = xs.map((d) => anchor * Math.sqrt(d / xs[xs.length - 1]));
  const series: Series[] = [
    { x: xs, y: ys, err: es, label: "observed error", color: "#1f77b4", marker: true, line: true },
    { x: xs, y: guide, label: "sqrt(dt) guide", color: "#888888", marker: false, line: true, dashed: true },
  ];
  return renderChart({
    title: "Error vs step size",
    xLabel: "dt",
    yLabel: "absolute error",
    xKind: "log",
    yKind: "log",
    series,
    notes,
  });
}

export function main(argv: string[]): number {
  if (argv.length !== 2) {
    console.error("usage: plot_convergence <convergence.csv> <out.svg>");
    return 2;
  }
  const [csvPath, outPath] = argv;
  try {
    const svg = buildConvergence(csvPath);
    writeFileSync(outPath, svg);
    console.log(`wrote ${outPath}`);
    return 0;
  } catch (e) {
    if (e instanceof CsvError || e instanceof Error) {
      console.error(`error: ${e.message}`);
      return 1;
    }
    throw e;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
