/**
 * Reader for the benchmark harness's error-probability CSV logs.
 *
 * The tool consumes exactly the published schema; any mismatch fails loudly
 * with the offending column named, never silently.
 */

import { readFileSync } from "node:fs";

export const POE_COLUMNS = [
  "algorithm",
  "instance",
  "t",
  "errors",
  "replications",
  "poe",
  "ci_low",
  "ci_high",
  "seed",
] as const;

export interface PoeRow {
  algorithm: string;
  instance: string;
  t: number;
  errors: number;
  replications: number;
  poe: number;
  ciLow: number;
  ciHigh: number;
  seed: string;
}

export class SchemaError extends Error {}

function splitLine(line: string): string[] {
  // the harness never quotes fields; plain comma splitting is the schema
  return line.split(",").map((cell) => cell.trim());
}

function parseNumber(raw: string, column: string, file: string, lineNo: number): number {
  const value = raw === "inf" ? Infinity : Number(raw);
  if (raw === "" || Number.isNaN(value)) {
    throw new SchemaError(`${file}:${lineNo}: column "${column}" has non-numeric value "${raw}"`);
  }
  return value;
}

export function parsePoeCsv(path: string): PoeRow[] {
  const text = readFileSync(path, "utf-8");
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`${path}: empty file`);
  }
  const header = splitLine(lines[0]);
  for (const column of POE_COLUMNS) {
    if (!header.includes(column)) {
      throw new SchemaError(`${path}: missing column "${column}"`);
    }
  }
  const index = new Map(header.map((name, i) => [name, i]));
  const rows: PoeRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = splitLine(lines[i]);
    if (cells.length !== header.length) {
      throw new SchemaError(`${path}:${i + 1}: expected ${header.length} cells, got ${cells.length}`);
    }
    const cell = (name: string) => cells[index.get(name)!];
    rows.push({
      algorithm: cell("algorithm"),
      instance: cell("instance"),
      t: parseNumber(cell("t"), "t", path, i + 1),
      errors: parseNumber(cell("errors"), "errors", path, i + 1),
      replications: parseNumber(cell("replications"), "replications", path, i + 1),
      poe: parseNumber(cell("poe"), "poe", path, i + 1),
      ciLow: parseNumber(cell("ci_low"), "ci_low", path, i + 1),
      ciHigh: parseNumber(cell("ci_high"), "ci_high", path, i + 1),
      seed: cell("seed"),
    });
  }
  if (rows.length === 0) {
    throw new SchemaError(`${path}: no data rows`);
  }
  return rows;
}
