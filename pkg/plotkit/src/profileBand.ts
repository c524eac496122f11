import { Table, distinct } from "./csv.js";
import { Svg, fmtTick, scale, ticks } from "./svg.js";

const M = { left: 64, right: 24, top: 36, bottom: 48 };
const W = 720;
const H = 480;

export interface BandSeries {
  label: string;
  color: string;
  xs: number[];
  mean: number[];
  sigma: number[];
  desired?: number[];
  mask?: number[];
}

/** Reduce one profiles.csv (trial, x[, y], profile, desired, mask) to a
 * cross-trial mean and population sigma per node. 2-D profiles collapse to
 * the midline slice y = median(y). */
export function bandFromProfiles(table: Table, label: string, color: string): BandSeries {
  let rows = table.rows;
  if (table.columns.includes("y")) {
    const ys = distinct(rows, "y").sort((a, b) => a - b);
    const mid = ys[Math.floor(ys.length / 2)];
    rows = rows.filter((r) => r.y === mid);
  }
  const xs = distinct(rows, "x");
  const trials = distinct(rows, "trial");
  const byX = new Map(xs.map((x) => [x, [] as number[]]));
  const desired = new Map<number, number>();
  const mask = new Map<number, number>();
  for (const row of rows) {
    byX.get(row.x)!.push(row.profile);
    if ("desired" in row) desired.set(row.x, row.desired);
    if ("mask" in row) mask.set(row.x, row.mask);
  }
  const mean: number[] = [];
  const sigma: number[] = [];
  for (const x of xs) {
    const vals = byX.get(x)!;
    const m = vals.reduce((a, b) => a + b, 0) / vals.length;
    const v = vals.reduce((a, b) => a + (b - m) * (b - m), 0) / vals.length;
    mean.push(m);
    sigma.push(Math.sqrt(v));
  }
  if (trials.length === 0 || xs.length === 0) {
    throw new Error("profiles file contains no usable rows");
  }
  return {
    label,
    color,
    xs,
    mean,
    sigma,
    desired: table.columns.includes("desired") ? xs.map((x) => desired.get(x)!) : undefined,
    mask: table.columns.includes("mask") ? xs.map((x) => mask.get(x)!) : undefined,
  };
}

/** Mean profile with a +-1 sigma band per input series, the desired profile
 * overlaid, and masked regions shaded. */
export function renderProfileBand(series: BandSeries[], title: string): string {
  const svg = new Svg(W, H);
  const plotW = W - M.left - M.right;
  const plotH = H - M.top - M.bottom;

  let yLo = Infinity;
  let yHi = -Infinity;
  for (const s of series) {
    for (let i = 0; i < s.xs.length; i++) {
      yLo = Math.min(yLo, s.mean[i] - s.sigma[i], s.desired?.[i] ?? Infinity);
      yHi = Math.max(yHi, s.mean[i] + s.sigma[i], s.desired?.[i] ?? -Infinity);
    }
  }
  const pad = 0.08 * (yHi - yLo || 1);
  yLo -= pad;
  yHi += pad;
  const first = series[0];
  const xLo = first.xs[0];
  const xHi = first.xs[first.xs.length - 1];
  const sx = scale(xLo, xHi, M.left, M.left + plotW);
  const sy = scale(yLo, yHi, M.top + plotH, M.top);

  // Masked-region shading from the first series.
  if (first.mask) {
    let start: number | null = null;
    for (let i = 0; i <= first.xs.length; i++) {
      const inside = i < first.xs.length && first.mask[i] > 0.5;
      if (inside && start === null) start = first.xs[i];
      if (!inside && start !== null) {
        const end = first.xs[i - 1];
        svg.rect(sx(start), M.top, sx(end) - sx(start), plotH, "#f3e2b0", ' fill-opacity="0.6"');
        start = null;
      }
    }
  }

  for (const s of series) {
    const upper: [number, number][] = s.xs.map((x, i) => [sx(x), sy(s.mean[i] + s.sigma[i])]);
    const lower: [number, number][] = s.xs.map((x, i) => [sx(x), sy(s.mean[i] - s.sigma[i])]);
    svg.polygon(upper.concat(lower.reverse()), s.color, 0.25);
    svg.polyline(
      s.xs.map((x, i) => [sx(x), sy(s.mean[i])]),
      s.color,
      1.8,
    );
  }
  if (first.desired) {
    svg.polyline(
      first.xs.map((x, i) => [sx(x), sy(first.desired![i])]),
      "#d62728",
      1.5,
      "6,4",
    );
  }

  for (const t of ticks(xLo, xHi)) {
    svg.line(sx(t), M.top + plotH, sx(t), M.top + plotH + 5, "#333");
    svg.text(sx(t), M.top + plotH + 18, fmtTick(t), 11);
  }
  for (const t of ticks(yLo, yHi)) {
    svg.line(M.left - 5, sy(t), M.left, sy(t), "#333");
    svg.text(M.left - 8, sy(t) + 4, fmtTick(t), 11, "end");
  }
  svg.line(M.left, M.top + plotH, M.left + plotW, M.top + plotH, "#333");
  svg.line(M.left, M.top, M.left, M.top + plotH, "#333");
  svg.text(M.left + plotW / 2, M.top + plotH + 38, "x", 12);
  svg.text(18, M.top + plotH / 2, "profile", 12, "middle", -90);
  svg.text(W / 2, 20, title, 14);
  series.forEach((s, i) => {
    const y = M.top + 16 + 16 * i;
    svg.line(M.left + 10, y - 4, M.left + 34, y - 4, s.color, 2);
    svg.text(M.left + 40, y, s.label, 11, "start");
  });
  return svg.render();
}
