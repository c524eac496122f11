/** Compact viridis colormap: anchor stops with linear interpolation. */

const ANCHORS: [number, number, number][] = [
  [68, 1, 84],
  [71, 44, 122],
  [59, 81, 139],
  [44, 113, 142],
  [33, 144, 141],
  [39, 173, 129],
  [92, 200, 99],
  [170, 220, 50],
  [253, 231, 37],
];

function hex2(v: number): string {
  return Math.round(v).toString(16).padStart(2, "0");
}

/** Map u in [0, 1] to a #rrggbb viridis color. */
export function viridis(u: number): string {
  const t = Math.min(1, Math.max(0, u)) * (ANCHORS.length - 1);
  const i = Math.min(ANCHORS.length - 2, Math.floor(t));
  const f = t - i;
  const [r0, g0, b0] = ANCHORS[i];
  const [r1, g1, b1] = ANCHORS[i + 1];
  return `#${hex2(r0 + f * (r1 - r0))}${hex2(g0 + f * (g1 - g0))}${hex2(b0 + f * (b1 - b0))}`;
}
