#!/usr/bin/env node
/** Figure CLI over solver artifacts: plot-bounds IN OUT, plot-tri IN OUT. */

import { pathToFileURL } from "node:url";

import { plotBounds } from "./bounds.js";
import { plotTriangulation } from "./triangulation.js";

const USAGE = `usage: bilevelbnb-plots <command> IN OUT

commands:
  plot-bounds   bounds.csv -> log-log bound convergence figure (SVG)
  plot-tri      triangulation_*.csv -> colored snapshot figure (SVG)
`;

export function main(argv: string[]): number {
  if (argv.length !== 3 || (argv[0] !== "plot-bounds" && argv[0] !== "plot-tri")) {
    process.stderr.write(USAGE);
    return 2;
  }
  const [command, inPath, outPath] = argv;
  try {
    if (command === "plot-bounds") plotBounds(inPath, outPath);
    else plotTriangulation(inPath, outPath);
  } catch (err) {
    process.stderr.write(`error: ${err instanceof Error ? err.message : String(err)}\n`);
    return 1;
  }
  process.stdout.write(`wrote ${outPath}\n`);
  return 0;
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
