/** How a figure is produced: where it reads, where it writes, how it scales. */
export interface PlotSpec {
  /** Input artifact (CSV path); informational once the text is loaded. */
  input: string;
  /** Output image path (SVG). */
  output: string;
  /** Logarithmic x axis (subproblem counts span decades). */
  logX: boolean;
  /** Logarithmic y axis (bound values span decades). */
  logY: boolean;
  /** Fill/stroke per triangulation status; must cover every status in the input. */
  colors: Record<string, string>;
  width: number;
  height: number;
}

/** Status colors matching the run's snapshot vocabulary. */
export const DEFAULT_COLORS: Record<string, string> = {
  dismissed: "#1f77b4", // blue
  relevant: "#d62728", // red
  "just-split": "#ffbf00", // yellow
  "gap-closed": "#2ca02c", // green
  incumbent: "#ff69b4", // pink dot
};

export const DEFAULT_SPEC: PlotSpec = {
  input: "",
  output: "",
  logX: true,
  logY: true,
  colors: DEFAULT_COLORS,
  width: 640,
  height: 440,
};

export function withDefaults(spec?: Partial<PlotSpec>): PlotSpec {
  return { ...DEFAULT_SPEC, ...spec, colors: { ...DEFAULT_COLORS, ...spec?.colors } };
}

/** Throw unless the color map covers every status that appears in the data. */
export function requireColors(spec: PlotSpec, statuses: Iterable<string>): void {
  for (const status of statuses) {
    if (!(status in spec.colors)) {
      throw new Error(`no color for status "${status}" in the plot spec`);
    }
  }
}
