/**
 * Strict CSV reading for the simulation artifacts.
 *
 * The figure scripts never recompute statistics: they parse the declared
 * columns, validate them, and draw.  Any structural problem (missing
 * required column, non-numeric cell, no data rows) is a hard error that
 * names the offender.
 */

import { readFileSync } from "fs";

export interface Table {
  header: string[];
  /** column name -> numeric values (NaN never allowed) */
  columns: Map<string, number[]>;
  rowCount: number;
}

export class CsvError extends Error {}

export function readTable(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (e) {
    throw new CsvError(`cannot read ${path}: ${(e as Error).message}`);
  }
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new CsvError(`${path}: empty file`);
  }
  const header = lines[0].split(",").map((h) => h.trim());
  if (lines.length === 1) {
    throw new CsvError(`${path}: no data rows`);
  }
  const columns = new Map<string, number[]>(header.map((h) => [h, []]));
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== header.length) {
      throw new CsvError(
        `${path}: row ${i + 1} has ${cells.length} cells, expected ${header.length}`,
      );
    }
    for (let j = 0; j < header.length; j++) {
      const v = Number(cells[j]);
      if (!Number.isFinite(v)) {
        throw new CsvError(
          `${path}: row ${i + 1}, column '${header[j]}': non-numeric cell '${cells[j].trim()}'`,
        );
      }
      columns.get(header[j])!.push(v);
    }
  }
  return { header, columns, rowCount: lines.length - 1 };
}

export function requireColumns(t: Table, names: string[], path: string): void {
  const missing = names.filter((n) => !t.columns.has(n));
  if (missing.length > 0) {
    throw new CsvError(`${path}: missing required column(s): ${missing.join(", ")}`);
  }
}

export function column(t: Table, name: string): number[] {
  const c = t.columns.get(name);
  if (c === undefined) {
    throw new CsvError(`missing column ${name}`);
  }
  return c;
}
