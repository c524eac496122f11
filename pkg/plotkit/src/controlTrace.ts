import { Table } from "./csv.js";
import { Svg, fmtTick, scale, ticks } from "./svg.js";

const M = { left: 64, right: 24, top: 36, bottom: 48 };
const W = 720;
const H = 400;

const PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"];

/** Applied-control traces from a controls CSV (t, u1, u2, ...). */
export function renderControlTrace(table: Table, title: string): string {
  const uCols = table.columns.filter((c) => /^u\d+$/.test(c));
  if (uCols.length === 0) {
    throw new Error('controls file has no "uN" columns');
  }
  const t = table.rows.map((r) => r.t);
  let lo = Infinity;
  let hi = -Infinity;
  for (const col of uCols) {
    for (const r of table.rows) {
      lo = Math.min(lo, r[col]);
      hi = Math.max(hi, r[col]);
    }
  }
  const pad = 0.08 * (hi - lo || 1);
  lo -= pad;
  hi += pad;

  const svg = new Svg(W, H);
  const plotW = W - M.left - M.right;
  const plotH = H - M.top - M.bottom;
  const sx = scale(t[0], t[t.length - 1], M.left, M.left + plotW);
  const sy = scale(lo, hi, M.top + plotH, M.top);

  uCols.forEach((col, i) => {
    svg.polyline(
      table.rows.map((r) => [sx(r.t), sy(r[col])] as [number, number]),
      PALETTE[i % PALETTE.length],
      1.5,
    );
    const y = M.top + 16 + 14 * i;
    svg.line(M.left + 10, y - 4, M.left + 30, y - 4, PALETTE[i % PALETTE.length], 2);
    svg.text(M.left + 36, y, col, 11, "start");
  });

  for (const tk of ticks(t[0], t[t.length - 1])) {
    svg.line(sx(tk), M.top + plotH, sx(tk), M.top + plotH + 5, "#333");
    svg.text(sx(tk), M.top + plotH + 18, fmtTick(tk), 11);
  }
  for (const tk of ticks(lo, hi)) {
    svg.line(M.left - 5, sy(tk), M.left, sy(tk), "#333");
    svg.text(M.left - 8, sy(tk) + 4, fmtTick(tk), 11, "end");
  }
  svg.line(M.left, M.top + plotH, M.left + plotW, M.top + plotH, "#333");
  svg.line(M.left, M.top, M.left, M.top + plotH, "#333");
  svg.text(M.left + plotW / 2, M.top + plotH + 38, "t [s]", 12);
  svg.text(18, M.top + plotH / 2, "control input", 12, "middle", -90);
  svg.text(W / 2, 20, title, 14);
  return svg.render();
}
