import { Table, distinct } from "./csv.js";
import { viridis } from "./color.js";
import { Svg, fmtTick, scale, ticks } from "./svg.js";

const M = { left: 64, right: 84, top: 36, bottom: 48 };
const W = 720;
const H = 480;

interface GridData {
  xs: number[]; // horizontal axis values
  ys: number[]; // vertical axis values
  values: number[][]; // [yi][xi]
  xLabel: string;
  yLabel: string;
  note: string;
}

function spatiotemporalGrid(table: Table): GridData {
  const times = distinct(table.rows, "t");
  const xs = distinct(table.rows, "x");
  const values: number[][] = xs.map(() => new Array(times.length).fill(NaN));
  const ti = new Map(times.map((t, i) => [t, i]));
  const xi = new Map(xs.map((x, i) => [x, i]));
  for (const row of table.rows) {
    values[xi.get(row.x)!][ti.get(row.t)!] = row.h;
  }
  return { xs: times, ys: xs, values, xLabel: "t [s]", yLabel: "x", note: "" };
}

function terminalSnapshotGrid(table: Table): GridData {
  const times = distinct(table.rows, "t");
  const tEnd = times[times.length - 1];
  const rows = table.rows.filter((r) => r.t === tEnd);
  const xs = distinct(rows, "x");
  const ys = distinct(rows, "y");
  const values: number[][] = ys.map(() => new Array(xs.length).fill(NaN));
  const xi = new Map(xs.map((x, i) => [x, i]));
  const yi = new Map(ys.map((y, i) => [y, i]));
  for (const row of rows) {
    values[yi.get(row.y)!][xi.get(row.x)!] = row.h;
  }
  return {
    xs,
    ys,
    values,
    xLabel: "x",
    yLabel: "y",
    note: `field at t = ${fmtTick(tEnd)} s`,
  };
}

/** Spatiotemporal heatmap for (t, x, h) data, or a terminal-time snapshot
 * for (t, x, y, h) data. */
export function renderHeatmap(table: Table, title: string): string {
  const grid = table.columns.includes("y")
    ? terminalSnapshotGrid(table)
    : spatiotemporalGrid(table);

  let lo = Infinity;
  let hi = -Infinity;
  for (const row of grid.values) {
    for (const v of row) {
      if (Number.isFinite(v)) {
        lo = Math.min(lo, v);
        hi = Math.max(hi, v);
      }
    }
  }
  if (!(hi > lo)) hi = lo + 1;

  const svg = new Svg(W, H);
  const plotW = W - M.left - M.right;
  const plotH = H - M.top - M.bottom;
  const cellW = plotW / grid.xs.length;
  const cellH = plotH / grid.ys.length;
  for (let yi = 0; yi < grid.ys.length; yi++) {
    for (let xi = 0; xi < grid.xs.length; xi++) {
      const v = grid.values[yi][xi];
      const u = Number.isFinite(v) ? (v - lo) / (hi - lo) : 0;
      svg.rect(
        M.left + xi * cellW,
        M.top + plotH - (yi + 1) * cellH,
        cellW + 0.5,
        cellH + 0.5,
        viridis(u),
      );
    }
  }

  axes(svg, grid.xs, grid.ys, grid.xLabel, grid.yLabel, plotW, plotH);
  colorbar(svg, lo, hi, plotH);
  svg.text(W / 2, 20, grid.note ? `${title} (${grid.note})` : title, 14);
  return svg.render();
}

function axes(
  svg: Svg,
  xs: number[],
  ys: number[],
  xLabel: string,
  yLabel: string,
  plotW: number,
  plotH: number,
): void {
  const sx = scale(xs[0], xs[xs.length - 1], M.left, M.left + plotW);
  const sy = scale(ys[0], ys[ys.length - 1], M.top + plotH, M.top);
  for (const t of ticks(xs[0], xs[xs.length - 1])) {
    svg.line(sx(t), M.top + plotH, sx(t), M.top + plotH + 5, "#333");
    svg.text(sx(t), M.top + plotH + 18, fmtTick(t), 11);
  }
  for (const t of ticks(ys[0], ys[ys.length - 1])) {
    svg.line(M.left - 5, sy(t), M.left, sy(t), "#333");
    svg.text(M.left - 8, sy(t) + 4, fmtTick(t), 11, "end");
  }
  svg.text(M.left + plotW / 2, M.top + plotH + 38, xLabel, 12);
  svg.text(18, M.top + plotH / 2, yLabel, 12, "middle", -90);
}

function colorbar(svg: Svg, lo: number, hi: number, plotH: number): void {
  const x = W - M.right + 18;
  const steps = 40;
  const h = plotH / steps;
  for (let i = 0; i < steps; i++) {
    svg.rect(x, M.top + plotH - (i + 1) * h, 14, h + 0.5, viridis(i / (steps - 1)));
  }
  svg.text(x + 7, M.top + plotH + 16, fmtTick(lo), 10);
  svg.text(x + 7, M.top - 6, fmtTick(hi), 10);
}
