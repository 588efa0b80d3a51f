/**
 * Overlay of the empirical boundary jump-kernel histogram against the
 * deterministic reference curve, on a log vertical scale with one-sigma
 * error bars.
 *
 * Usage: node plot_kernel_overlay.js <kernel.csv> <out.svg>
 *
 * kernel.csv columns: delta_mid, density, stderr, reference_value.  The
 * reference column is optional: without it the overlay is drawn from the
 * empirical histogram alone and a warning is printed.
 */

import { writeFileSync } from "fs";
import { CsvError, column, readTable, requireColumns } from "./csv";
import { renderChart, Series } from "./svg";

export function buildKernelOverlay(csvPath: string): string {
  const t = readTable(csvPath);
  requireColumns(t, ["delta_mid", "density", "stderr"], csvPath);
  const x = column(t, "delta_mid");
  const y = column(t, "density");
  const err = column(t, "stderr");
  const series: Series[] = [
    { x, y, err, label: "empirical", color: "#1f77b4", line: false, marker: true },
  ];
  const notes: string[] = [];
  if (t.columns.has("reference_value")) {
    series.push({
      x,
      y: column(t, "reference_value"),
      label: "reference",
      color: "#d62728",
      marker: false,
      line: true,
    });
  } else {
    console.warn(`warning: ${csvPath} carries no reference_value column; ` +
      `drawing the empirical overlay alone`);
    notes.push("no reference curve in input");
  }
  return renderChart({
    title: "Boundary jump kernel: empirical vs reference",
    xLabel: "angular separation",
    yLabel: "jump intensity density",
    xKind: "linear",
    yKind: "log",
    series,
    notes,
  });
}

export function main(argv: string[]): number {
  if (argv.length !== 2) {
    console.error("usage: plot_kernel_overlay <kernel.csv> <out.svg>");
    return 2;
  }
  const [csvPath, outPath] = argv;
  try {
    const svg = buildKernelOverlay(csvPath);
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
