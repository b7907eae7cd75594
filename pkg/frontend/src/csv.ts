/**
 * Strict readers for the exitmc CSV schemas.
 *
 * Headers must match the fixed schemas byte for byte; anything else (or a
 * file with no data rows) is a SchemaError so broken pipelines fail loudly
 * instead of producing empty figures.
 */

export const LEVELS_HEADER =
  "estimator,level,h,N,mean_diff,var_diff,mean_fine,var_fine," +
  "kurtosis,cost_per_sample,normalized_cost";
export const RUN_HEADER = "estimator,eps,estimate,error,chosen_L,total_cost,eps2_cost";
export const SAMPLES_HEADER = "estimator,eps,level,h,N";

export class SchemaError extends Error {}

export interface LevelsRow {
  estimator: string;
  level: number;
  h: number;
  n: number;
  meanDiff: number;
  varDiff: number;
  meanFine: number;
  varFine: number;
  kurtosis: number;
  costPerSample: number;
  normalizedCost: number;
}

export interface RunRow {
  estimator: string;
  eps: number;
  estimate: number;
  error: number;
  chosenL: number;
  totalCost: number;
  eps2Cost: number;
}

export interface SamplesRow {
  estimator: string;
  eps: number;
  level: number;
  h: number;
  n: number;
}

export type CsvKind = "levels" | "run" | "samples";

/** Identify one of the fixed schemas from the header line. */
export function detectKind(text: string, source: string): CsvKind {
  const header = text.split("\n", 1)[0]?.trim();
  if (header === LEVELS_HEADER) return "levels";
  if (header === RUN_HEADER) return "run";
  if (header === SAMPLES_HEADER) return "samples";
  throw new SchemaError(`${source}: unrecognized header ${JSON.stringify(header)}`);
}

function dataRows(text: string, header: string, source: string): string[][] {
  const lines = text.trim().split("\n");
  if (lines[0]?.trim() !== header) {
    throw new SchemaError(
      `${source}: header mismatch; expected ${JSON.stringify(header)}, ` +
      `got ${JSON.stringify(lines[0] ?? "")}`
    );
  }
  const rows = lines.slice(1).filter((l) => l.trim().length > 0);
  if (rows.length === 0) {
    throw new SchemaError(`${source}: no data rows`);
  }
  const width = header.split(",").length;
  return rows.map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== width) {
      throw new SchemaError(`${source}: row ${i + 2} has ${cells.length} columns, expected ${width}`);
    }
    return cells;
  });
}

function num(cell: string, source: string, what: string): number {
  const v = Number(cell);
  if (cell.trim() === "" || Number.isNaN(v) && cell.trim().toLowerCase() !== "nan") {
    throw new SchemaError(`${source}: bad ${what} value ${JSON.stringify(cell)}`);
  }
  return v;
}

export function parseLevelsCsv(text: string, source: string): LevelsRow[] {
  return dataRows(text, LEVELS_HEADER, source).map((c) => ({
    estimator: c[0],
    level: num(c[1], source, "level"),
    h: num(c[2], source, "h"),
    n: num(c[3], source, "N"),
    meanDiff: num(c[4], source, "mean_diff"),
    varDiff: num(c[5], source, "var_diff"),
    meanFine: num(c[6], source, "mean_fine"),
    varFine: num(c[7], source, "var_fine"),
    kurtosis: num(c[8], source, "kurtosis"),
    costPerSample: num(c[9], source, "cost_per_sample"),
    normalizedCost: num(c[10], source, "normalized_cost"),
  }));
}

export function parseRunCsv(text: string, source: string): RunRow[] {
  return dataRows(text, RUN_HEADER, source).map((c) => ({
    estimator: c[0],
    eps: num(c[1], source, "eps"),
    estimate: num(c[2], source, "estimate"),
    error: num(c[3], source, "error"),
    chosenL: num(c[4], source, "chosen_L"),
    totalCost: num(c[5], source, "total_cost"),
    eps2Cost: num(c[6], source, "eps2_cost"),
  }));
}

export function parseSamplesCsv(text: string, source: string): SamplesRow[] {
  return dataRows(text, SAMPLES_HEADER, source).map((c) => ({
    estimator: c[0],
    eps: num(c[1], source, "eps"),
    level: num(c[2], source, "level"),
    h: num(c[3], source, "h"),
    n: num(c[4], source, "N"),
  }));
}
