/** Pure SVG geometry builders for the preview panel.
 *
 * Everything here is a deterministic function of the server payload; no
 * statistics are computed client-side, and identical payloads yield
 * byte-identical path strings (snapshot-friendly).
 */

export interface PlotBox {
  width: number;
  height: number;
  padLeft: number;
  padRight: number;
  padTop: number;
  padBottom: number;
}

export const DEFAULT_BOX: PlotBox = {
  width: 560,
  height: 300,
  padLeft: 42,
  padRight: 10,
  padTop: 10,
  padBottom: 28,
};

const round2 = (v: number): number => Math.round(v * 100) / 100;

export interface Scales {
  x: (v: number) => number;
  y: (v: number) => number;
}

/** x spans the time grid; y is survival on [0, 1] with 0 at the bottom. */
export function survivalScales(grid: number[], box: PlotBox = DEFAULT_BOX): Scales {
  const x0 = grid[0];
  const x1 = grid[grid.length - 1];
  const innerW = box.width - box.padLeft - box.padRight;
  const innerH = box.height - box.padTop - box.padBottom;
  return {
    x: (v) => round2(box.padLeft + ((v - x0) / (x1 - x0)) * innerW),
    y: (v) => round2(box.padTop + (1 - v) * innerH),
  };
}

export function linePath(xs: number[], ys: number[], scales: Scales): string {
  if (xs.length === 0) return "";
  const parts = xs.map(
    (x, i) => `${i === 0 ? "M" : "L"}${scales.x(x)},${scales.y(ys[i])}`,
  );
  return parts.join("");
}

/** Closed polygon covering the area between the lo and hi envelopes. */
export function bandPath(
  xs: number[],
  lo: number[],
  hi: number[],
  scales: Scales,
): string {
  if (xs.length === 0) return "";
  const upper = xs.map(
    (x, i) => `${i === 0 ? "M" : "L"}${scales.x(x)},${scales.y(hi[i])}`,
  );
  const lower = [...xs.keys()]
    .reverse()
    .map((i) => `L${scales.x(xs[i])},${scales.y(lo[i])}`);
  return upper.join("") + lower.join("") + "Z";
}

/** Tick positions along the time axis (at most `count` round values). */
export function timeTicks(grid: number[], count = 7): number[] {
  const max = grid[grid.length - 1];
  const rawStep = max / (count - 1);
  const step = [1, 2, 5, 10, 20, 50].find((s) => s >= rawStep) ?? 100;
  const ticks: number[] = [];
  for (let v = 0; v <= max + 1e-9; v += step) ticks.push(v);
  return ticks;
}

/**
 * Arc path for the acceptance-rate gauge: a half-circle filled clockwise in
 * proportion to `fraction` (clamped to [0, 1]).
 */
export function gaugeArc(fraction: number, radius = 40, cx = 50, cy = 48): string {
  const f = Math.min(Math.max(fraction, 0), 1);
  if (f === 0) return "";
  const angle = Math.PI * (1 - f); // pi (left) down to 0 (right)
  const x = round2(cx + radius * Math.cos(angle));
  const y = round2(cy - radius * Math.sin(angle));
  const largeArc = 0; // a half circle never exceeds 180 degrees
  return `M${cx - radius},${cy}A${radius},${radius} 0 ${largeArc} 1 ${x},${y}`;
}

/** Human-oriented formatting shared by the readouts. */
export function formatNumber(v: number, digits = 3): string {
  if (!Number.isFinite(v)) return "-";
  return v.toFixed(digits);
}

export function formatPercent(v: number, digits = 1): string {
  if (!Number.isFinite(v)) return "-";
  return `${(100 * v).toFixed(digits)}%`;
}
