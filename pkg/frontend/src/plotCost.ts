#!/usr/bin/env node
/**
 * plot-cost <run.csv> <run_samples.csv> -o <figure.svg>
 *
 * Renders per-level sample counts and accuracy-scaled cost from an exitmc
 * run.  The two input files may be given in either order; they are told
 * apart by their headers.  Exits nonzero on missing files or schema
 * mismatch.
 */

import { readFileSync, writeFileSync } from "fs";
import { classifyCostInputs, figureCost } from "./figures.js";

function usage(): never {
  console.error("usage: plot-cost <run.csv> <run_samples.csv> -o <figure.svg>");
  process.exit(2);
}

export function main(argv: string[]): number {
  const files: string[] = [];
  let out = "";
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "-o" || argv[i] === "--out") {
      out = argv[++i] ?? "";
    } else {
      files.push(argv[i]);
    }
  }
  if (files.length !== 2 || !out) usage();
  const inputs = classifyCostInputs(
    files.map((source) => ({ text: readFileSync(source, "utf-8"), source }))
  );
  const svg = figureCost(inputs);
  writeFileSync(out, svg);
  console.log(`wrote ${out}`);
  return 0;
}

if (process.argv[1] && /plotCost\.(ts|js)$/.test(process.argv[1])) {
  try {
    process.exit(main(process.argv.slice(2)));
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    process.exit(1);
  }
}
