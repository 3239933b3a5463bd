#!/usr/bin/env node
/**
 * poeplot: regenerate error-probability figures from benchmark CSV logs.
 *
 * Usage:
 *   poeplot --csv run/poe_9_sh.csv --csv run/poe_9_sr.csv --out figure.svg
 *           [--instance 9] [--logy | --no-logy]
 */

import { writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";
import { parsePoeCsv, PoeRow, SchemaError } from "./csv.js";
import { renderPoeFigure } from "./render.js";

export function run(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      allowNegative: true, // enables --no-logy
      options: {
        csv: { type: "string", multiple: true },
        out: { type: "string" },
        instance: { type: "string" },
        logy: { type: "boolean", default: true },
      },
    });
  } catch (error) {
    console.error(`error: ${(error as Error).message}`);
    return 2;
  }
  const values = parsed.values;
  const csvPaths = values.csv ?? [];
  if (csvPaths.length === 0 || !values.out) {
    console.error("error: need at least one --csv and an --out path");
    return 2;
  }

  let rows: PoeRow[] = [];
  try {
    for (const path of csvPaths) {
      rows = rows.concat(parsePoeCsv(path));
    }
    const svg = renderPoeFigure({
      rows,
      instance: values.instance,
      logy: values.logy !== false,
    });
    writeFileSync(values.out, svg, "utf-8");
  } catch (error) {
    if (error instanceof SchemaError) {
      console.error(`schema error: ${error.message}`);
    } else {
      console.error(`error: ${(error as Error).message}`);
    }
    return 1;
  }
  return 0;
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  process.exit(run(process.argv.slice(2)));
}
