/** Triangulation snapshot figure: one colored outline per leaf simplex,
 * plus a pink dot at the incumbent weights. Two-dimensional boxes only. */

import { readFileSync, writeFileSync } from "node:fs";

import { parseCsv, toNumber } from "./csv.js";
import { PlotSpec, requireColors, withDefaults } from "./plotspec.js";
import { document, el, num, scale } from "./svg.js";

export interface Triangle {
  id: number;
  depth: number;
  status: string;
  lb: number;
  /** Vertex coordinates, [x0, y0, x1, y1, x2, y2]. */
  coords: number[];
}

export interface Snapshot {
  triangles: Triangle[];
  incumbent: { x: number; y: number; ub: number } | null;
  /** Data rows in the file (triangles plus the incumbent marker row). */
  rowCount: number;
}

const META = ["id", "depth", "status", "lb"];
const VERTS_2D = ["v0x", "v0y", "v1x", "v1y", "v2x", "v2y"];

export function parseTriangulationCsv(text: string): Snapshot {
  const table = parseCsv(text);
  const meta = table.header.slice(0, META.length);
  if (meta.join(",") !== META.join(",")) {
    throw new Error(`malformed CSV: triangulation header is "${table.header.join(",")}"`);
  }
  const verts = table.header.slice(META.length);
  if (verts.join(",") !== VERTS_2D.join(",")) {
    throw new Error(
      `unsupported dimension: vertex columns are "${verts.join(",")}"; ` +
        "only two-dimensional snapshots (v0x..v2y) can be drawn",
    );
  }
  const triangles: Triangle[] = [];
  let incumbent: Snapshot["incumbent"] = null;
  table.rows.forEach((fields, i) => {
    const where = `row ${i + 1}`;
    const id = toNumber(fields[0], `id in ${where}`);
    const coords = fields.slice(META.length).map((f, j) => toNumber(f, `${VERTS_2D[j]} in ${where}`));
    if (id < 0) {
      incumbent = { x: coords[0], y: coords[1], ub: toNumber(fields[3], `lb in ${where}`) };
    } else {
      triangles.push({
        id,
        depth: toNumber(fields[1], `depth in ${where}`),
        status: fields[2],
        lb: toNumber(fields[3], `lb in ${where}`),
        coords,
      });
    }
  });
  return { triangles, incumbent, rowCount: table.rows.length };
}

export function renderTriangulation(snap: Snapshot, partial?: Partial<PlotSpec>): string {
  const spec = withDefaults(partial);
  requireColors(spec, snap.triangles.map((t) => t.status));

  const xs = snap.triangles.flatMap((t) => [t.coords[0], t.coords[2], t.coords[4]]);
  const ys = snap.triangles.flatMap((t) => [t.coords[1], t.coords[3], t.coords[5]]);
  if (snap.incumbent) {
    xs.push(snap.incumbent.x);
    ys.push(snap.incumbent.y);
  }
  if (xs.length === 0) throw new Error("nothing to draw: snapshot has no rows");
  const lo = [Math.min(...xs), Math.min(...ys)];
  const hi = [Math.max(...xs), Math.max(...ys)];
  const pad = [0.04 * (hi[0] - lo[0]) || 0.05, 0.04 * (hi[1] - lo[1]) || 0.05];

  const m = { left: 58, right: 130, top: 20, bottom: 40 };
  const X = scale(lo[0] - pad[0], hi[0] + pad[0], m.left, spec.width - m.right, false);
  const Y = scale(lo[1] - pad[1], hi[1] + pad[1], spec.height - m.bottom, m.top, false);

  const body: string[] = [];
  body.push(el("rect", { x: 0, y: 0, width: spec.width, height: spec.height, fill: "white" }));

  // deepest last so fresh splits draw over their dismissed neighbors
  const ordered = [...snap.triangles].sort((a, b) => a.depth - b.depth || a.id - b.id);
  for (const t of ordered) {
    const color = spec.colors[t.status];
    const points = [0, 1, 2]
      .map((j) => `${num(X(t.coords[2 * j]))},${num(Y(t.coords[2 * j + 1]))}`)
      .join(" ");
    body.push(el("polygon", {
      points,
      fill: color,
      "fill-opacity": 0.22,
      stroke: color,
      "stroke-width": 1.1,
      "data-status": t.status,
    }));
  }
  if (snap.incumbent) {
    body.push(el("circle", {
      cx: num(X(snap.incumbent.x)),
      cy: num(Y(snap.incumbent.y)),
      r: 5,
      fill: spec.colors["incumbent"],
      stroke: "#912456",
      "data-status": "incumbent",
    }));
  }

  for (const [axis, value] of [["x", lo[0]], ["x", hi[0]], ["y", lo[1]], ["y", hi[1]]] as const) {
    const label = String(Math.round(value * 1e6) / 1e6);
    if (axis === "x") {
      body.push(el("text", { x: num(X(value)), y: spec.height - m.bottom + 18, "text-anchor": "middle" }, label));
    } else {
      body.push(el("text", { x: m.left - 6, y: num(Y(value) + 4), "text-anchor": "end" }, label));
    }
  }

  Object.entries(spec.colors).forEach(([status, color], i) => {
    const y = m.top + 16 + 18 * i;
    const x = spec.width - m.right + 14;
    if (status === "incumbent") {
      body.push(el("circle", { cx: x + 7, cy: y - 4, r: 5, fill: color }));
    } else {
      body.push(el("rect", { x, y: y - 11, width: 14, height: 10, fill: color, "fill-opacity": 0.5, stroke: color }));
    }
    body.push(el("text", { x: x + 20, y }, status));
  });

  return document(spec.width, spec.height, {
    "data-rows": snap.rowCount,
    "data-triangles": snap.triangles.length,
    "data-incumbent": snap.incumbent ? 1 : 0,
  }, body);
}

/** Read a triangulation_*.csv, render it, write the SVG; returns the markup. */
export function plotTriangulation(inPath: string, outPath: string, spec?: Partial<PlotSpec>): string {
  const markup = renderTriangulation(parseTriangulationCsv(readFileSync(inPath, "utf8")), {
    ...spec, input: inPath, output: outPath,
  });
  writeFileSync(outPath, markup);
  return markup;
}
