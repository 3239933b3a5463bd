import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { parsePoeCsv, SchemaError } from "../src/csv.js";

const HEADER = "algorithm,instance,t,errors,replications,poe,ci_low,ci_high,seed";

function tempCsv(content: string): string {
  const dir = mkdtempSync(join(tmpdir(), "poeplot-"));
  const path = join(dir, "poe.csv");
  writeFileSync(path, content);
  return path;
}

describe("parsePoeCsv", () => {
  it("parses well-formed rows", () => {
    const path = tempCsv(`${HEADER}\nsh,9,40,12,100,0.12,0.06,0.2,7\nsh,9,2000,1,100,0.01,0.0,0.05,7\n`);
    const rows = parsePoeCsv(path);
    expect(rows).toHaveLength(2);
    expect(rows[0].algorithm).toBe("sh");
    expect(rows[0].t).toBe(40);
    expect(rows[1].poe).toBeCloseTo(0.01);
    expect(rows[1].ciHigh).toBeCloseTo(0.05);
  });

  it("names the missing column", () => {
    const path = tempCsv("algorithm,instance,t\nsh,9,40\n");
    expect(() => parsePoeCsv(path)).toThrowError(/missing column "errors"/);
  });

  it("rejects empty files and header-only files", () => {
    expect(() => parsePoeCsv(tempCsv(""))).toThrow(SchemaError);
    expect(() => parsePoeCsv(tempCsv(`${HEADER}\n`))).toThrowError(/no data rows/);
  });

  it("names the column holding a bad value", () => {
    const path = tempCsv(`${HEADER}\nsh,9,40,twelve,100,0.12,0.06,0.2,7\n`);
    expect(() => parsePoeCsv(path)).toThrowError(/column "errors"/);
  });

  it("rejects ragged rows", () => {
    const path = tempCsv(`${HEADER}\nsh,9,40,12\n`);
    expect(() => parsePoeCsv(path)).toThrowError(/expected 9 cells/);
  });
});
