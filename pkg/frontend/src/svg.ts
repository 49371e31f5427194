/** Minimal SVG assembly: attribute escaping, elements, and log-axis ticks. */

export function esc(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function num(value: number): string {
  // short, stable coordinates; 2 decimals is below a pixel at figure scale
  const rounded = Math.round(value * 100) / 100;
  return Object.is(rounded, -0) ? "0" : String(rounded);
}

export type Attrs = Record<string, string | number>;

export function el(name: string, attrs: Attrs, body?: string): string {
  const parts = Object.entries(attrs).map(
    ([key, value]) => `${key}="${esc(String(value))}"`,
  );
  const head = parts.length ? `<${name} ${parts.join(" ")}` : `<${name}`;
  return body === undefined ? `${head}/>` : `${head}>${body}</${name}>`;
}

export function document(
  width: number,
  height: number,
  attrs: Attrs,
  body: string[],
): string {
  return (
    el(
      "svg",
      {
        xmlns: "http://www.w3.org/2000/svg",
        width,
        height,
        viewBox: `0 0 ${width} ${height}`,
        "font-family": "sans-serif",
        "font-size": 12,
        ...attrs,
      },
      `\n${body.join("\n")}\n`,
    ) + "\n"
  );
}

/** Powers of ten covering [lo, hi]; both ends positive. */
export function decadeTicks(lo: number, hi: number): number[] {
  const first = Math.ceil(Math.log10(lo) - 1e-9);
  const last = Math.floor(Math.log10(hi) + 1e-9);
  const ticks: number[] = [];
  for (let e = first; e <= last; e++) ticks.push(10 ** e);
  return ticks;
}

export function tickLabel(value: number): string {
  const e = Math.round(Math.log10(value));
  if (e >= -3 && e <= 3) return String(10 ** e);
  return `1e${e}`;
}

/** Affine or log map from a data interval onto a pixel interval. */
export function scale(
  lo: number,
  hi: number,
  pxLo: number,
  pxHi: number,
  log: boolean,
): (v: number) => number {
  const a = log ? Math.log10(lo) : lo;
  const b = log ? Math.log10(hi) : hi;
  const span = b - a || 1;
  return (v) => {
    const t = ((log ? Math.log10(v) : v) - a) / span;
    return pxLo + t * (pxHi - pxLo);
  };
}
