/**
 * Figure assembly: maps the fixed CSV schemas onto multi-panel SVG charts.
 * No recomputation happens here; every plotted number comes from the files.
 */

import {
  CsvKind,
  LevelsRow,
  RunRow,
  SamplesRow,
  SchemaError,
  detectKind,
  parseLevelsCsv,
  parseRunCsv,
  parseSamplesCsv,
} from "./csv.js";
import { PALETTE, PanelSpec, Series, renderPanels } from "./svg.js";

const LOG2 = Math.log2;
const LOG10 = Math.log10;

function groupBy<T>(rows: T[], key: (r: T) => string): Map<string, T[]> {
  const out = new Map<string, T[]>();
  for (const r of rows) {
    const k = key(r);
    const bucket = out.get(k);
    if (bucket) bucket.push(r);
    else out.set(k, [r]);
  }
  return out;
}

function seriesPerEstimator(
  rows: LevelsRow[],
  y: (r: LevelsRow) => number
): Series[] {
  const groups = groupBy(rows, (r) => r.estimator);
  return [...groups.entries()].map(([estimator, group], i) => ({
    label: estimator,
    color: PALETTE[i % PALETTE.length],
    points: group
      .map((r): [number, number] => [r.level, y(r)])
      .filter((p) => Number.isFinite(p[1])),
  }));
}

/**
 * Four level-diagnostic panels from a levels CSV: variance decay, mean
 * correction decay, normalised cost, kurtosis; one series per estimator.
 */
export function figureLevels(text: string, source: string): string {
  const rows = parseLevelsCsv(text, source);
  const panels: PanelSpec[] = [
    {
      title: "Level-difference variance",
      xLabel: "level",
      yLabel: "log2 variance",
      series: seriesPerEstimator(rows, (r) => LOG2(r.varDiff)),
    },
    {
      title: "Mean level correction",
      xLabel: "level",
      yLabel: "log2 |mean|",
      series: seriesPerEstimator(rows, (r) => LOG2(Math.abs(r.meanDiff))),
    },
    {
      title: "Cost per sample (normalised)",
      xLabel: "level",
      yLabel: "fraction of full-horizon path",
      series: seriesPerEstimator(rows, (r) => r.normalizedCost),
    },
    {
      title: "Kurtosis of level difference",
      xLabel: "level",
      yLabel: "kurtosis",
      series: seriesPerEstimator(rows, (r) => r.kurtosis),
    },
  ];
  return renderPanels(panels, 2);
}

export interface CostInputs {
  run: { text: string; source: string };
  samples: { text: string; source: string };
}

/** Sort inputs into the run-summary and per-level-samples files by header. */
export function classifyCostInputs(
  files: Array<{ text: string; source: string }>
): CostInputs {
  let run: { text: string; source: string } | undefined;
  let samples: { text: string; source: string } | undefined;
  for (const f of files) {
    const kind: CsvKind = detectKind(f.text, f.source);
    if (kind === "run") {
      if (run) throw new SchemaError(`duplicate run-summary CSV: ${f.source}`);
      run = f;
    } else if (kind === "samples") {
      if (samples) throw new SchemaError(`duplicate samples CSV: ${f.source}`);
      samples = f;
    } else {
      throw new SchemaError(`${f.source}: expected run-summary or samples CSV`);
    }
  }
  if (!run || !samples) {
    throw new SchemaError(
      "plot-cost needs one run-summary CSV and one per-level samples CSV"
    );
  }
  return { run, samples };
}

/**
 * Two panels: per-level sample counts for every (estimator, eps) pair, and
 * accuracy-scaled total cost per estimator.
 */
export function figureCost(inputs: CostInputs): string {
  const runRows: RunRow[] = parseRunCsv(inputs.run.text, inputs.run.source);
  const sampleRows: SamplesRow[] = parseSamplesCsv(
    inputs.samples.text,
    inputs.samples.source
  );

  const nlGroups = groupBy(sampleRows, (r) => `${r.estimator} eps=${r.eps}`);
  const nlSeries: Series[] = [...nlGroups.entries()].map(([label, group], i) => ({
    label,
    color: PALETTE[i % PALETTE.length],
    dash: i % 2 === 1 ? "5,3" : undefined,
    points: group
      .map((r): [number, number] => [r.level, LOG10(r.n)])
      .filter((p) => Number.isFinite(p[1])),
  }));

  const costGroups = groupBy(runRows, (r) => r.estimator);
  const costSeries: Series[] = [...costGroups.entries()].map(([label, group], i) => ({
    label,
    color: PALETTE[i % PALETTE.length],
    points: group
      .slice()
      .sort((a, b) => a.eps - b.eps)
      .map((r): [number, number] => [LOG10(r.eps), r.eps2Cost]),
  }));

  const panels: PanelSpec[] = [
    {
      title: "Samples per level",
      xLabel: "level",
      yLabel: "log10 N",
      series: nlSeries,
    },
    {
      title: "Accuracy-scaled total cost",
      xLabel: "log10 eps",
      yLabel: "eps^2 x cost",
      series: costSeries,
    },
  ];
  return renderPanels(panels, 2);
}
