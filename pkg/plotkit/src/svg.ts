/** Minimal deterministic SVG document builder.
 *
 * All numbers pass through a fixed formatter, so rendering the same inputs
 * always produces byte-identical files.
 */

export function fmt(v: number): string {
  if (!Number.isFinite(v)) return "0";
  const s = v.toFixed(3);
  return s === "-0.000" ? "0.000" : s;
}

export interface Margins {
  left: number;
  right: number;
  top: number;
  bottom: number;
}

export class Svg {
  private parts: string[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
  ) {}

  push(element: string): void {
    this.parts.push(element);
  }

  rect(x: number, y: number, w: number, h: number, fill: string, extra = ""): void {
    this.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"${extra}/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1): void {
    this.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="${stroke}" stroke-width="${width}"/>`,
    );
  }

  polyline(points: [number, number][], stroke: string, width = 1.5, dash = ""): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.push(
      `<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="${width}"${dashAttr}/>`,
    );
  }

  polygon(points: [number, number][], fill: string, opacity = 1): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.push(`<polygon points="${pts}" fill="${fill}" fill-opacity="${opacity}"/>`);
  }

  text(x: number, y: number, content: string, size = 12, anchor = "middle", rotate = 0): void {
    const transform = rotate ? ` transform="rotate(${rotate} ${fmt(x)} ${fmt(y)})"` : "";
    this.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-family="Helvetica,Arial,sans-serif" font-size="${size}" text-anchor="${anchor}"${transform}>${escapeXml(content)}</text>`,
    );
  }

  render(): string {
    return (
      `<?xml version="1.0" encoding="UTF-8"?>\n` +
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
      `viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<rect x="0" y="0" width="${this.width}" height="${this.height}" fill="white"/>\n` +
      this.parts.join("\n") +
      `\n</svg>\n`
    );
  }
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Linear data-to-pixel scale. */
export function scale(
  domainMin: number,
  domainMax: number,
  rangeMin: number,
  rangeMax: number,
): (v: number) => number {
  const span = domainMax - domainMin || 1;
  return (v: number) => rangeMin + ((v - domainMin) / span) * (rangeMax - rangeMin);
}

/** Round axis tick values deterministically. */
export function ticks(min: number, max: number, n = 5): number[] {
  const out: number[] = [];
  for (let i = 0; i < n; i++) out.push(min + ((max - min) * i) / (n - 1));
  return out;
}

export function fmtTick(v: number): string {
  const a = Math.abs(v);
  if (a !== 0 && (a < 0.01 || a >= 10000)) return v.toExponential(1);
  return Number(v.toFixed(3)).toString();
}
