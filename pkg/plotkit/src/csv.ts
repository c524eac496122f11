import { readFileSync } from "node:fs";
import Papa from "papaparse";

export interface Table {
  columns: string[];
  rows: Record<string, number>[];
}

/** Load a numeric CSV and check that the required columns are present. */
export function loadCsv(path: string, required: string[]): Table {
  const text = readFileSync(path, "utf-8");
  const parsed = Papa.parse<Record<string, number>>(text.trim(), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new Error(`${path}: parse error at row ${e.row}: ${e.message}`);
  }
  const columns = parsed.meta.fields ?? [];
  for (const col of required) {
    if (!columns.includes(col)) {
      throw new Error(
        `${path}: missing required column "${col}" (found: ${columns.join(", ")})`,
      );
    }
  }
  if (parsed.data.length === 0) {
    throw new Error(`${path}: no data rows`);
  }
  return { columns, rows: parsed.data };
}

/** Distinct values of a column in first-appearance order. */
export function distinct(rows: Record<string, number>[], col: string): number[] {
  const seen = new Set<number>();
  const out: number[] = [];
  for (const row of rows) {
    const v = row[col];
    if (!seen.has(v)) {
      seen.add(v);
      out.push(v);
    }
  }
  return out;
}
