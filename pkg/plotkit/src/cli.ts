import { writeFileSync } from "node:fs";
import { basename } from "node:path";
import { parseArgs } from "node:util";
import { loadCsv } from "./csv.js";
import { renderHeatmap } from "./heatmap.js";
import { bandFromProfiles, renderProfileBand } from "./profileBand.js";
import { renderControlTrace } from "./controlTrace.js";
import { renderSurface } from "./surface.js";

const KINDS = ["heatmap", "surface", "profile-band", "control-trace"] as const;
const PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd"];

export function render(kind: string, inputs: string[], title?: string): string {
  if (inputs.length === 0) {
    throw new Error("at least one --in file is required");
  }
  const name = title ?? basename(inputs[0]).replace(/\.csv$/, "");
  switch (kind) {
    case "heatmap":
      return renderHeatmap(loadCsv(inputs[0], ["t", "x", "h"]), name);
    case "surface":
      return renderSurface(loadCsv(inputs[0], ["t", "x", "h"]), name);
    case "profile-band": {
      const series = inputs.map((path, i) =>
        bandFromProfiles(
          loadCsv(path, ["trial", "x", "profile"]),
          basename(path).replace(/\.csv$/, ""),
          PALETTE[i % PALETTE.length],
        ),
      );
      return renderProfileBand(series, name);
    }
    case "control-trace":
      return renderControlTrace(loadCsv(inputs[0], ["t"]), name);
    default:
      throw new Error(`unknown figure kind "${kind}" (choose from: ${KINDS.join(", ")})`);
  }
}

export function main(argv: string[]): number {
  try {
    const { values, positionals } = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        in: { type: "string", multiple: true },
        out: { type: "string" },
        title: { type: "string" },
      },
    });
    if (positionals[0] !== "plot" || positionals.length !== 2) {
      process.stderr.write(
        "usage: plotkit plot <heatmap|surface|profile-band|control-trace> --in FILE... --out FILE [--title T]\n",
      );
      return 2;
    }
    const kind = positionals[1];
    const inputs = values.in ?? [];
    if (!values.out) {
      throw new Error("--out FILE is required");
    }
    const svg = render(kind, inputs, values.title);
    writeFileSync(values.out, svg, "utf-8");
    process.stdout.write(`${values.out}\n`);
    return 0;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}
