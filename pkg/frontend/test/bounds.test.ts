import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { gapSeries, parseBoundsCsv, renderBounds, ubIncreases } from "../src/bounds.js";
import { main } from "../src/cli.js";

const HEADER = "iter,subproblems,lb,ub,gap";

function file(rows: string[]): string {
  return [HEADER, ...rows].join("\n") + "\n";
}

const TWO_ROWS = file(["1,2,0.5,2.0,1.5", "2,6,0.75,1.25,0.5"]);

describe("parseBoundsCsv", () => {
  it("round-trips a two-row file", () => {
    const rows = parseBoundsCsv(TWO_ROWS);
    expect(rows).toHaveLength(2);
    expect(rows[1]).toEqual({ iter: 2, subproblems: 6, lb: 0.75, ub: 1.25, gap: 0.5 });
  });

  it("reads the writer's infinity spelling", () => {
    const rows = parseBoundsCsv(file(["1,2,-inf,inf,inf"]));
    expect(rows[0].lb).toBe(-Infinity);
    expect(rows[0].ub).toBe(Infinity);
  });

  it("rejects a wrong header, a short row, and a non-number", () => {
    expect(() => parseBoundsCsv("iter,lb,ub\n1,0,1\n")).toThrow(/malformed CSV/);
    expect(() => parseBoundsCsv(file(["1,2,0.5"]))).toThrow(/malformed CSV/);
    expect(() => parseBoundsCsv(file(["1,2,0.5,two,1.5"]))).toThrow(/malformed CSV/);
    expect(() => parseBoundsCsv("")).toThrow(/malformed CSV/);
  });
});

describe("renderBounds", () => {
  it("renders a two-row synthetic file", () => {
    const markup = renderBounds(parseBoundsCsv(TWO_ROWS));
    expect(markup).toContain("<svg");
    expect(markup).toContain('data-rows="2"');
    expect(markup).not.toContain("NaN");
  });

  it("survives a gap-closed tail of exact zeros on log axes", () => {
    const markup = renderBounds(parseBoundsCsv(file(["1,2,0,0,0"])));
    expect(markup).toContain('data-rows="1"');
    expect(markup).not.toContain("NaN");
  });

  it("recomputes the gap series from the bound columns", () => {
    const rows = parseBoundsCsv(TWO_ROWS);
    expect(gapSeries(rows)).toEqual(rows.map((r) => r.ub - r.lb));
    expect(gapSeries(rows)).toEqual(rows.map((r) => r.gap));
  });

  it("flags upper-bound increases and only those", () => {
    const clean = parseBoundsCsv(TWO_ROWS);
    expect(ubIncreases(clean)).toEqual([]);
    expect(renderBounds(clean)).toContain('data-ub-increases="0"');

    const bumped = parseBoundsCsv(file(["1,2,0.5,2.0,1.5", "2,6,0.6,2.5,1.9", "3,9,0.7,1.0,0.3"]));
    expect(ubIncreases(bumped)).toEqual([1]);
    const markup = renderBounds(bumped);
    expect(markup).toContain('data-ub-increases="1"');
    expect(markup.match(/data-flag="ub-increase"/g)).toHaveLength(1);
  });
});

describe("plot-bounds command", () => {
  it("writes the figure and leaves the input byte-identical", () => {
    const dir = mkdtempSync(join(tmpdir(), "bounds-"));
    const inPath = join(dir, "bounds.csv");
    const outPath = join(dir, "bounds.svg");
    writeFileSync(inPath, TWO_ROWS);
    expect(main(["plot-bounds", inPath, outPath])).toBe(0);
    expect(readFileSync(outPath, "utf8")).toContain("<svg");
    expect(readFileSync(inPath, "utf8")).toBe(TWO_ROWS);
  });

  it("fails with a nonzero exit on a malformed file", () => {
    const dir = mkdtempSync(join(tmpdir(), "bounds-"));
    const inPath = join(dir, "bounds.csv");
    writeFileSync(inPath, "not,a,bounds\nfile,at,all\n");
    expect(main(["plot-bounds", inPath, join(dir, "out.svg")])).toBe(1);
    expect(main(["plot-bounds", join(dir, "missing.csv"), join(dir, "out.svg")])).toBe(1);
  });

  it("rejects bad usage", () => {
    expect(main([])).toBe(2);
    expect(main(["plot-bounds", "only-one-arg"])).toBe(2);
    expect(main(["draw", "a", "b"])).toBe(2);
  });
});
