import { Table, distinct } from "./csv.js";
import { viridis } from "./color.js";
import { Svg, fmtTick } from "./svg.js";

const W = 720;
const H = 520;

/** Isometric surface of (t, x, h) data, or of the terminal (x, y, h) field
 * for 2-D trajectories. Quads are painted back to front. */
export function renderSurface(table: Table, title: string): string {
  let us: number[];
  let vs: number[];
  let grid: number[][];
  if (table.columns.includes("y")) {
    const times = distinct(table.rows, "t");
    const tEnd = times[times.length - 1];
    const rows = table.rows.filter((r) => r.t === tEnd);
    us = distinct(rows, "x");
    vs = distinct(rows, "y");
    grid = us.map(() => new Array(vs.length).fill(0));
    const ui = new Map(us.map((u, i) => [u, i]));
    const vi = new Map(vs.map((v, i) => [v, i]));
    for (const r of rows) grid[ui.get(r.x)!][vi.get(r.y)!] = r.h;
  } else {
    us = distinct(table.rows, "t");
    vs = distinct(table.rows, "x");
    grid = us.map(() => new Array(vs.length).fill(0));
    const ui = new Map(us.map((u, i) => [u, i]));
    const vi = new Map(vs.map((v, i) => [v, i]));
    for (const r of table.rows) grid[ui.get(r.t)!][vi.get(r.x)!] = r.h;
  }

  let lo = Infinity;
  let hi = -Infinity;
  for (const row of grid) for (const v of row) {
    if (Number.isFinite(v)) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  if (!(hi > lo)) hi = lo + 1;

  // Isometric projection with height exaggeration.
  const nu = us.length;
  const nv = vs.length;
  const cx = W / 2;
  const baseY = H - 110;
  const su = 290 / Math.max(nu - 1, 1);
  const sv = 290 / Math.max(nv - 1, 1);
  const zScale = 140 / (hi - lo);
  const proj = (i: number, j: number, z: number): [number, number] => [
    cx + (i * su - j * sv) * 0.85,
    baseY - (i * su + j * sv) * 0.42 - (z - lo) * zScale,
  ];

  const svg = new Svg(W, H);
  for (let i = nu - 2; i >= 0; i--) {
    for (let j = nv - 2; j >= 0; j--) {
      const z =
        (grid[i][j] + grid[i + 1][j] + grid[i][j + 1] + grid[i + 1][j + 1]) / 4;
      const pts: [number, number][] = [
        proj(i, j, grid[i][j]),
        proj(i + 1, j, grid[i + 1][j]),
        proj(i + 1, j + 1, grid[i + 1][j + 1]),
        proj(i, j + 1, grid[i][j + 1]),
      ];
      svg.polygon(pts, viridis((z - lo) / (hi - lo)), 1);
    }
  }
  svg.text(W / 2, 20, title, 14);
  svg.text(W / 2, H - 18, `range [${fmtTick(lo)}, ${fmtTick(hi)}]`, 11);
  return svg.render();
}
