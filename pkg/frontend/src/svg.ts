/**
 * Minimal dependency-free SVG line charts.
 *
 * Callers pass already-transformed coordinates (e.g. log2 of a variance) and
 * label the axes accordingly; every scale here is linear.  Output is a pure
 * function of the input, so figures are byte-stable for identical data.
 */

export interface Series {
  label: string;
  color: string;
  points: Array<[number, number]>;
  dash?: string;
}

export interface PanelSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
}

const PANEL_W = 460;
const PANEL_H = 340;
const MARGIN = { top: 34, right: 16, bottom: 46, left: 62 };

export const PALETTE = ["#4361ee", "#e63946", "#2d6a4f", "#f4a261", "#7b2cbf", "#0096c7"];

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function fmt(v: number): string {
  if (!Number.isFinite(v)) return String(v);
  const a = Math.abs(v);
  if (a !== 0 && (a >= 1e5 || a < 1e-3)) return v.toExponential(1);
  return String(Number(v.toPrecision(6)));
}

function niceTicks(min: number, max: number, count: number): number[] {
  const range = max - min || 1;
  const rough = range / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((n) => n >= rough) ?? rough;
  const start = Math.ceil(min / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= max + step * 1e-9; v += step) ticks.push(v);
  return ticks;
}

interface Range { lo: number; hi: number }

function dataRange(values: number[]): Range {
  const finite = values.filter((v) => Number.isFinite(v));
  if (finite.length === 0) return { lo: 0, hi: 1 };
  let lo = Math.min(...finite);
  let hi = Math.max(...finite);
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const pad = (hi - lo) * 0.06;
  return { lo: lo - pad, hi: hi + pad };
}

function renderPanel(panel: PanelSpec, ox: number, oy: number): string {
  const x0 = ox + MARGIN.left;
  const y0 = oy + MARGIN.top;
  const w = PANEL_W - MARGIN.left - MARGIN.right;
  const h = PANEL_H - MARGIN.top - MARGIN.bottom;

  const xs = panel.series.flatMap((s) => s.points.map((p) => p[0]));
  const ys = panel.series.flatMap((s) => s.points.map((p) => p[1]));
  const xr = dataRange(xs);
  const yr = dataRange(ys);
  const sx = (v: number) => x0 + ((v - xr.lo) / (xr.hi - xr.lo)) * w;
  const sy = (v: number) => y0 + h - ((v - yr.lo) / (yr.hi - yr.lo)) * h;

  const parts: string[] = [];
  parts.push(`<rect x="${x0}" y="${y0}" width="${w}" height="${h}" fill="none" stroke="#999"/>`);
  parts.push(`<text x="${ox + PANEL_W / 2}" y="${oy + 18}" text-anchor="middle" font-size="13" font-weight="bold">${esc(panel.title)}</text>`);

  for (const t of niceTicks(xr.lo, xr.hi, 6)) {
    const px = sx(t);
    parts.push(`<line x1="${px.toFixed(2)}" y1="${y0}" x2="${px.toFixed(2)}" y2="${y0 + h}" stroke="#eee"/>`);
    parts.push(`<text x="${px.toFixed(2)}" y="${y0 + h + 16}" text-anchor="middle" font-size="10">${fmt(t)}</text>`);
  }
  for (const t of niceTicks(yr.lo, yr.hi, 6)) {
    const py = sy(t);
    parts.push(`<line x1="${x0}" y1="${py.toFixed(2)}" x2="${x0 + w}" y2="${py.toFixed(2)}" stroke="#eee"/>`);
    parts.push(`<text x="${x0 - 6}" y="${(py + 3).toFixed(2)}" text-anchor="end" font-size="10">${fmt(t)}</text>`);
  }
  parts.push(`<text x="${ox + PANEL_W / 2}" y="${oy + PANEL_H - 8}" text-anchor="middle" font-size="11">${esc(panel.xLabel)}</text>`);
  parts.push(`<text x="${ox + 14}" y="${oy + PANEL_H / 2}" text-anchor="middle" font-size="11" transform="rotate(-90 ${ox + 14} ${oy + PANEL_H / 2})">${esc(panel.yLabel)}</text>`);

  panel.series.forEach((s) => {
    const pts = s.points
      .filter((p) => Number.isFinite(p[0]) && Number.isFinite(p[1]))
      .map(([x, y]) => `${sx(x).toFixed(2)},${sy(y).toFixed(2)}`);
    if (pts.length === 0) return;
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(`<polyline class="series" data-label="${esc(s.label)}" points="${pts.join(" ")}" fill="none" stroke="${s.color}" stroke-width="1.6"${dash}/>`);
    for (const p of pts) {
      const [cx, cy] = p.split(",");
      parts.push(`<circle cx="${cx}" cy="${cy}" r="2.4" fill="${s.color}"/>`);
    }
  });

  // legend in the top-right corner of the plot area
  panel.series.forEach((s, i) => {
    const ly = y0 + 10 + i * 14;
    const lx = x0 + w - 120;
    parts.push(`<line x1="${lx}" y1="${ly}" x2="${lx + 18}" y2="${ly}" stroke="${s.color}" stroke-width="2"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`);
    parts.push(`<text x="${lx + 23}" y="${ly + 3}" font-size="10">${esc(s.label)}</text>`);
  });

  return parts.join("\n");
}

/** Lay panels out in a fixed-column grid and wrap them in one SVG document. */
export function renderPanels(panels: PanelSpec[], columns: number): string {
  const rows = Math.ceil(panels.length / columns);
  const width = columns * PANEL_W;
  const height = rows * PANEL_H;
  const body = panels
    .map((p, i) => renderPanel(p, (i % columns) * PANEL_W, Math.floor(i / columns) * PANEL_H))
    .join("\n");
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">\n<rect width="${width}" height="${height}" fill="white"/>\n${body}\n</svg>\n`;
}
