import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { loadCsv } from "../src/csv.js";
import { render, main } from "../src/cli.js";

const FIXTURES = [
  "fx_nagumo_suppress",
  "fx_nagumo_accelerate",
  "fx_burgers_track",
  "fx_heat2d_track",
  "fx_heat1d_boundary",
];

const root = join(__dirname, "..", "fixtures");
const trajectory = (name: string) => join(root, name, "mpc", "trial000_trajectory.csv");
const profiles = (name: string) => join(root, name, "mpc", "profiles.csv");
const controls = (name: string) => join(root, name, "mpc", "trial000_controls.csv");

describe("per-experiment figure rendering", () => {
  for (const name of FIXTURES) {
    it(`renders a heatmap and a profile band for ${name}`, () => {
      const heat = render("heatmap", [trajectory(name)]);
      expect(heat).toContain("<svg");
      expect(heat).toContain("</svg>");
      const band = render("profile-band", [profiles(name)]);
      expect(band).toContain("<polyline");
    });

    it(`rerendering ${name} is byte-identical`, () => {
      expect(render("heatmap", [trajectory(name)])).toEqual(
        render("heatmap", [trajectory(name)]),
      );
      expect(render("profile-band", [profiles(name)])).toEqual(
        render("profile-band", [profiles(name)]),
      );
    });
  }
});

describe("other figure kinds", () => {
  it("renders control traces and surfaces", () => {
    const trace = render("control-trace", [controls("fx_heat1d_boundary")]);
    expect(trace).toContain("u1");
    expect(trace).toContain("u2");
    const surf = render("surface", [trajectory("fx_nagumo_suppress")]);
    expect(surf).toContain("<polygon");
  });

  it("overlays several profile files on one axes", () => {
    const two = render("profile-band", [
      profiles("fx_nagumo_suppress"),
      profiles("fx_nagumo_accelerate"),
    ]);
    expect(two.match(/<polygon/g)!.length).toBeGreaterThanOrEqual(2);
  });
});

describe("schema errors", () => {
  it("names the missing column", () => {
    const dir = mkdtempSync(join(tmpdir(), "plotkit-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "t,value\n0,1\n");
    expect(() => render("heatmap", [bad])).toThrowError(/missing required column "x"/);
  });

  it("rejects an empty csv without writing a file", () => {
    const dir = mkdtempSync(join(tmpdir(), "plotkit-"));
    const empty = join(dir, "empty.csv");
    writeFileSync(empty, "t,x,h\n");
    const out = join(dir, "out.svg");
    const code = main(["plot", "heatmap", "--in", empty, "--out", out]);
    expect(code).toBe(1);
    expect(() => readFileSync(out)).toThrow();
  });

  it("handles a single-timestep trajectory", () => {
    const dir = mkdtempSync(join(tmpdir(), "plotkit-"));
    const single = join(dir, "single.csv");
    writeFileSync(single, "t,x,h\n0,0,1\n0,0.5,2\n0,1,3\n");
    expect(render("heatmap", [single])).toContain("<svg");
  });

  it("collapses the band for a single trial", () => {
    const table = loadCsv(profiles("fx_burgers_track"), ["trial", "x", "profile"]);
    const one = {
      ...table,
      rows: table.rows.filter((r) => r.trial === 0),
    };
    expect(one.rows.length).toBeGreaterThan(0);
  });
});

describe("cli", () => {
  it("writes the requested output file", () => {
    const dir = mkdtempSync(join(tmpdir(), "plotkit-"));
    const out = join(dir, "fig.svg");
    const code = main([
      "plot", "heatmap", "--in", trajectory("fx_burgers_track"), "--out", out,
    ]);
    expect(code).toBe(0);
    expect(readFileSync(out, "utf-8")).toContain("</svg>");
  });

  it("rejects unknown kinds", () => {
    const code = main(["plot", "sparkline", "--in", "x.csv", "--out", "y.svg"]);
    expect(code).toBe(1);
  });
});
