/** Bound-convergence figure: upper bound (blue) and lower bound (red)
 * against the number of solved subproblems, log-log by default, with the
 * gap recomputed from the two columns as a dashed overlay. */

import { readFileSync, writeFileSync } from "node:fs";

import { expectHeader, parseCsv, toNumber } from "./csv.js";
import { PlotSpec, withDefaults } from "./plotspec.js";
import { decadeTicks, document, el, num, scale, tickLabel } from "./svg.js";

export interface BoundsRow {
  iter: number;
  subproblems: number;
  lb: number;
  ub: number;
  gap: number;
}

const HEADER = ["iter", "subproblems", "lb", "ub", "gap"];

export function parseBoundsCsv(text: string): BoundsRow[] {
  const table = parseCsv(text);
  expectHeader(table, HEADER, "bounds");
  if (table.rows.length === 0) throw new Error("malformed CSV: bounds has no rows");
  return table.rows.map((fields, i) => ({
    iter: toNumber(fields[0], `iter in row ${i + 1}`),
    subproblems: toNumber(fields[1], `subproblems in row ${i + 1}`),
    lb: toNumber(fields[2], `lb in row ${i + 1}`),
    ub: toNumber(fields[3], `ub in row ${i + 1}`),
    gap: toNumber(fields[4], `gap in row ${i + 1}`),
  }));
}

/** The gap series a correct writer would have emitted: ub - lb, rowwise. */
export function gapSeries(rows: BoundsRow[]): number[] {
  return rows.map((row) => row.ub - row.lb);
}

/** Indices whose upper bound exceeds the previous row's (none on real runs). */
export function ubIncreases(rows: BoundsRow[]): number[] {
  const bad: number[] = [];
  for (let i = 1; i < rows.length; i++) {
    if (rows[i].ub > rows[i - 1].ub) bad.push(i);
  }
  return bad;
}

interface Series {
  label: string;
  color: string;
  dash?: string;
  values: number[];
}

export function renderBounds(rows: BoundsRow[], partial?: Partial<PlotSpec>): string {
  const spec = withDefaults(partial);
  const series: Series[] = [
    { label: "upper bound", color: "#1f77b4", values: rows.map((r) => r.ub) },
    { label: "lower bound", color: "#d62728", values: rows.map((r) => r.lb) },
    { label: "gap", color: "#7f7f7f", dash: "5 4", values: gapSeries(rows) },
  ];

  // log axes cannot show zeros or negatives; clamp to a floor one decade
  // below the smallest positive value (gap-closed runs bottom out there)
  const positives = series
    .flatMap((s) => s.values)
    .filter((v) => Number.isFinite(v) && v > 0);
  const floor = positives.length ? Math.min(...positives) / 10 : 1e-16;
  const top = positives.length ? Math.max(...positives) : 1;
  const yLo = spec.logY ? floor : Math.min(0, ...series.flatMap((s) => s.values));
  const yHi = top > yLo ? top : yLo * 10;
  const clampY = (v: number): number => {
    if (!Number.isFinite(v)) return yHi;
    return spec.logY ? Math.min(Math.max(v, yLo), yHi) : v;
  };

  const xs = rows.map((r) => r.subproblems);
  const xLo = spec.logX ? Math.max(1, Math.min(...xs)) : Math.min(...xs);
  const xHi = Math.max(...xs, xLo);

  const m = { left: 74, right: 16, top: 28, bottom: 46 };
  const X = scale(xLo, xHi, m.left, spec.width - m.right, spec.logX);
  const Y = scale(yLo, yHi, spec.height - m.bottom, m.top, spec.logY);

  const body: string[] = [];
  body.push(el("rect", { x: 0, y: 0, width: spec.width, height: spec.height, fill: "white" }));

  const xTicks = spec.logX ? thin(decadeTicks(xLo, xHi)) : [xLo, xHi];
  const yTicks = spec.logY ? thin(decadeTicks(yLo, yHi)) : [yLo, yHi];
  for (const t of xTicks) {
    const px = X(t);
    body.push(el("line", { x1: num(px), y1: m.top, x2: num(px), y2: spec.height - m.bottom, stroke: "#dddddd" }));
    body.push(el("text", { x: num(px), y: spec.height - m.bottom + 16, "text-anchor": "middle" }, tickLabel(t)));
  }
  for (const t of yTicks) {
    const py = Y(t);
    body.push(el("line", { x1: m.left, y1: num(py), x2: spec.width - m.right, y2: num(py), stroke: "#dddddd" }));
    body.push(el("text", { x: m.left - 6, y: num(py + 4), "text-anchor": "end" }, tickLabel(t)));
  }
  body.push(el("rect", {
    x: m.left, y: m.top,
    width: spec.width - m.left - m.right, height: spec.height - m.top - m.bottom,
    fill: "none", stroke: "#333333",
  }));
  body.push(el("text", {
    x: num((m.left + spec.width - m.right) / 2), y: spec.height - 10, "text-anchor": "middle",
  }, "subproblems"));

  for (const s of series) {
    const pts = rows
      .map((row, i) => `${num(X(Math.max(row.subproblems, xLo)))},${num(Y(clampY(s.values[i])))}`)
      .join(" ");
    const attrs: Record<string, string | number> = {
      points: pts, fill: "none", stroke: s.color, "stroke-width": 1.6,
    };
    if (s.dash) attrs["stroke-dasharray"] = s.dash;
    body.push(el("polyline", attrs));
    for (let i = 0; i < rows.length; i++) {
      body.push(el("circle", {
        cx: num(X(Math.max(rows[i].subproblems, xLo))), cy: num(Y(clampY(s.values[i]))),
        r: 2.2, fill: s.color,
      }));
    }
  }

  // monotonicity overlay: ring any point where the upper bound went up
  const increases = ubIncreases(rows);
  for (const i of increases) {
    body.push(el("circle", {
      cx: num(X(Math.max(rows[i].subproblems, xLo))), cy: num(Y(clampY(rows[i].ub))),
      r: 6, fill: "none", stroke: "#ff7f0e", "stroke-width": 2,
      "data-flag": "ub-increase",
    }));
  }

  series.forEach((s, i) => {
    const y = m.top + 14 + 16 * i;
    body.push(el("line", {
      x1: m.left + 10, y1: y - 4, x2: m.left + 34, y2: y - 4,
      stroke: s.color, "stroke-width": 1.6,
      ...(s.dash ? { "stroke-dasharray": s.dash } : {}),
    }));
    body.push(el("text", { x: m.left + 40, y }, s.label));
  });

  return document(spec.width, spec.height, {
    "data-rows": rows.length,
    "data-ub-increases": increases.length,
  }, body);
}

function thin(ticks: number[]): number[] {
  const step = Math.ceil(ticks.length / 8);
  return ticks.filter((_, i) => i % step === 0);
}

/** Read a bounds.csv, render it, write the SVG; returns the markup. */
export function plotBounds(inPath: string, outPath: string, spec?: Partial<PlotSpec>): string {
  const markup = renderBounds(parseBoundsCsv(readFileSync(inPath, "utf8")), {
    ...spec, input: inPath, output: outPath,
  });
  writeFileSync(outPath, markup);
  return markup;
}
