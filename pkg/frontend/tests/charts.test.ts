import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { bandWidths, heatmapSvg, sweepBandSvg } from "../src/charts.js";
import { ResultDocument } from "../src/api.js";

function fixture(name: string): ResultDocument {
  return JSON.parse(
    readFileSync(new URL(`./fixtures/${name}`, import.meta.url), "utf-8"),
  );
}

describe("sweep band chart", () => {
  it("renders every certified number verbatim from the document", () => {
    const doc = fixture("fnr_dashed.json");
    const svg = sweepBandSvg([{ label: "FNR", rows: doc.results }]);
    for (const row of doc.results) {
      expect(svg).toContain(`data-upper="${row.upper}"`);
      expect(svg).toContain(`data-lower="${row.lower}"`);
      expect(svg).toContain(`data-delta="${row.delta}"`);
    }
  });

  it("band widths collapse under the independence toggle", () => {
    // same data, same budgets: dropping the confounder-to-proxy edge plus
    // the zero-error cell identifies the false negative rate
    const wide = bandWidths(fixture("fnr_dashed.json").results);
    const tight = bandWidths(fixture("fnr_independent.json").results);
    expect(Math.min(...wide.slice(1))).toBeGreaterThan(0.05);
    expect(Math.max(...tight)).toBeLessThan(0.005);
    expect(Math.max(...tight)).toBeLessThan(Math.min(...wide.slice(1)) / 10);
  });

  it("handles empty input", () => {
    const svg = sweepBandSvg([{ label: "x", rows: [] }]);
    expect(svg).toContain("no certified points");
  });
});

describe("heatmap", () => {
  it("renders a cell per grid point with upper bounds verbatim", () => {
    const doc = fixture("two_bias.json");
    const svg = heatmapSvg(doc.results);
    const gridRows = doc.results.filter((r) => Array.isArray(r.delta));
    expect(gridRows.length).toBeGreaterThan(0);
    for (const row of gridRows) {
      const [d1, d2] = row.delta as number[];
      expect(svg).toContain(`data-d1="${d1}" data-d2="${d2}" data-upper="${row.upper}"`);
    }
  });

  it("reports missing grids", () => {
    expect(heatmapSvg([])).toContain("no grid points");
  });
});
