#!/usr/bin/env node
/**
 * plot-levels <levels.csv> -o <figure.svg>
 *
 * Renders the four level-diagnostic panels from an exitmc levels CSV.
 * Exits nonzero on missing files or schema mismatch.
 */

import { readFileSync, writeFileSync } from "fs";
import { figureLevels } from "./figures.js";

function usage(): never {
  console.error("usage: plot-levels <levels.csv> -o <figure.svg>");
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
  if (files.length !== 1 || !out) usage();
  const svg = figureLevels(readFileSync(files[0], "utf-8"), files[0]);
  writeFileSync(out, svg);
  console.log(`wrote ${out}`);
  return 0;
}

if (process.argv[1] && /plotLevels\.(ts|js)$/.test(process.argv[1])) {
  try {
    process.exit(main(process.argv.slice(2)));
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    process.exit(1);
  }
}
