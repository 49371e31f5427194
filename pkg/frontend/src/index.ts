export { BoundsRow, gapSeries, parseBoundsCsv, plotBounds, renderBounds, ubIncreases } from "./bounds.js";
export { PlotSpec, DEFAULT_COLORS, DEFAULT_SPEC, withDefaults } from "./plotspec.js";
export {
  Snapshot,
  Triangle,
  parseTriangulationCsv,
  plotTriangulation,
  renderTriangulation,
} from "./triangulation.js";
