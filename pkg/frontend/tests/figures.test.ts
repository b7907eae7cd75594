import { mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { fileURLToPath } from "url";
import { describe, expect, test } from "vitest";

import { LEVELS_HEADER, RUN_HEADER, SAMPLES_HEADER, SchemaError } from "../src/csv.js";
import { classifyCostInputs, figureCost, figureLevels } from "../src/figures.js";
import { main as plotCostMain } from "../src/plotCost.js";
import { main as plotLevelsMain } from "../src/plotLevels.js";

const FIXTURES = join(fileURLToPath(new URL(".", import.meta.url)), "fixtures");
const levelsText = readFileSync(join(FIXTURES, "levels.csv"), "utf-8");
const runText = readFileSync(join(FIXTURES, "run.csv"), "utf-8");
const samplesText = readFileSync(join(FIXTURES, "run_samples.csv"), "utf-8");

function seriesCount(svg: string): number {
  return (svg.match(/class="series"/g) ?? []).length;
}

describe("figureLevels", () => {
  test("renders four panels with one series per estimator", () => {
    const svg = figureLevels(levelsText, "levels.csv");
    expect(svg.startsWith("<svg")).toBe(true);
    // 3 estimators in the fixture, 4 panels
    expect(seriesCount(svg)).toBe(12);
    for (const est of ["orig", "new1", "new2"]) {
      expect(svg).toContain(`data-label="${est}"`);
    }
  });

  test("single-estimator CSV gives single-series panels", () => {
    const lines = levelsText.trim().split("\n");
    const single = [lines[0], ...lines.slice(1).filter((l) => l.startsWith("new2,"))];
    const svg = figureLevels(single.join("\n") + "\n", "single.csv");
    expect(seriesCount(svg)).toBe(4);
  });

  test("empty CSV is a schema error", () => {
    expect(() => figureLevels(LEVELS_HEADER + "\n", "empty.csv")).toThrow(SchemaError);
    expect(() => figureLevels("", "blank.csv")).toThrow(SchemaError);
  });

  test("wrong header is a schema error", () => {
    const mangled = levelsText.replace("mean_diff", "mean_dif");
    expect(() => figureLevels(mangled, "bad.csv")).toThrow(SchemaError);
  });

  test("output is byte-stable", () => {
    expect(figureLevels(levelsText, "a")).toBe(figureLevels(levelsText, "a"));
  });
});

describe("figureCost", () => {
  const inputs = () =>
    classifyCostInputs([
      { text: runText, source: "run.csv" },
      { text: samplesText, source: "run_samples.csv" },
    ]);

  test("renders a series per (estimator, eps) and per estimator", () => {
    const svg = figureCost(inputs());
    // fixture: one estimator at three accuracies -> 3 sample-count series
    // plus 1 scaled-cost series
    expect(seriesCount(svg)).toBe(4);
    expect(svg).toContain('data-label="new2 eps=0.04"');
    expect(svg).toContain('data-label="new2"');
  });

  test("input order does not matter", () => {
    const swapped = classifyCostInputs([
      { text: samplesText, source: "run_samples.csv" },
      { text: runText, source: "run.csv" },
    ]);
    expect(figureCost(swapped)).toBe(figureCost(inputs()));
  });

  test("duplicate or missing roles are schema errors", () => {
    expect(() =>
      classifyCostInputs([
        { text: runText, source: "a.csv" },
        { text: runText, source: "b.csv" },
      ])
    ).toThrow(SchemaError);
    expect(() =>
      classifyCostInputs([{ text: runText, source: "a.csv" }])
    ).toThrow(SchemaError);
    expect(() =>
      classifyCostInputs([
        { text: levelsText, source: "levels.csv" },
        { text: runText, source: "run.csv" },
      ])
    ).toThrow(SchemaError);
  });

  test("empty samples CSV is a schema error", () => {
    expect(() =>
      figureCost({
        run: { text: runText, source: "run.csv" },
        samples: { text: SAMPLES_HEADER + "\n", source: "empty.csv" },
      })
    ).toThrow(SchemaError);
  });
});

describe("command-line entry points", () => {
  test("plot-levels writes an SVG file", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    const out = join(dir, "levels.svg");
    const code = plotLevelsMain([join(FIXTURES, "levels.csv"), "-o", out]);
    expect(code).toBe(0);
    const svg = readFileSync(out, "utf-8");
    expect(svg).toContain("</svg>");
    expect(seriesCount(svg)).toBe(12);
  });

  test("plot-cost writes an SVG file", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    const out = join(dir, "cost.svg");
    const code = plotCostMain([
      join(FIXTURES, "run.csv"),
      join(FIXTURES, "run_samples.csv"),
      "-o",
      out,
    ]);
    expect(code).toBe(0);
    expect(readFileSync(out, "utf-8")).toContain("</svg>");
  });

  test("plot-levels rejects a schema-mismatched file", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, RUN_HEADER + "\nnew2,0.01,0.4,0,2,100,0.01\n");
    expect(() => plotLevelsMain([bad, "-o", join(dir, "x.svg")])).toThrow(SchemaError);
  });

  test("plot-levels rejects a missing file", () => {
    expect(() => plotLevelsMain(["/nonexistent.csv", "-o", "/tmp/x.svg"])).toThrow();
  });
});
