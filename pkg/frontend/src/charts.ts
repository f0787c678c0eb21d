/**
 * Pure-string SVG builders for sweep bands and two-bias heatmaps.
 *
 * Charts never compute statistics: every plotted number is read verbatim
 * from a ResultDocument row, so the service stays the single source of
 * truth for bounds.
 */

import { BoundsRow } from "./api.js";

export interface ChartOptions {
  width?: number;
  height?: number;
  margin?: number;
  title?: string;
}

const DEFAULTS = { width: 520, height: 300, margin: 46 };

function scale(domainLo: number, domainHi: number, rangeLo: number, rangeHi: number) {
  const span = domainHi - domainLo || 1;
  return (v: number) => rangeLo + ((v - domainLo) / span) * (rangeHi - rangeLo);
}

function fmt(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toPrecision(4);
}

export interface BandSeries {
  label: string;
  rows: BoundsRow[];
  color?: string;
}

/** Lower/upper certified curves with the band filled between them. */
export function sweepBandSvg(series: BandSeries[], options: ChartOptions = {}): string {
  const { width, height, margin } = { ...DEFAULTS, ...options };
  const rows = series.flatMap((s) => s.rows).filter((r) => r.lower !== null);
  if (rows.length === 0) {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}"><text x="10" y="20">no certified points</text></svg>`;
  }
  const deltas = rows.map((r) => (typeof r.delta === "number" ? r.delta : r.delta[0]));
  const los = rows.map((r) => r.lower as number);
  const his = rows.map((r) => r.upper as number);
  const x = scale(Math.min(...deltas), Math.max(...deltas), margin, width - margin);
  const pad = 0.05 * (Math.max(...his) - Math.min(...los) || 1);
  const y = scale(Math.min(...los) - pad, Math.max(...his) + pad, height - margin, margin);

  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
  ];
  if (options.title) {
    parts.push(`<text x="${width / 2}" y="18" text-anchor="middle" font-size="13">${options.title}</text>`);
  }
  const palette = ["#2166ac", "#b2182b", "#1b7837"];
  series.forEach((s, si) => {
    const color = s.color ?? palette[si % palette.length];
    const pts = s.rows
      .filter((r) => r.lower !== null && r.upper !== null)
      .map((r) => ({
        d: typeof r.delta === "number" ? r.delta : r.delta[0],
        lo: r.lower as number,
        hi: r.upper as number,
        ilo: r.incumbent_lo,
        ihi: r.incumbent_hi,
      }))
      .sort((a, b) => a.d - b.d);
    if (pts.length === 0) return;
    const upperPath = pts.map((p, i) => `${i ? "L" : "M"}${x(p.d)},${y(p.hi)}`).join(" ");
    const lowerPath = pts.map((p, i) => `${i ? "L" : "M"}${x(p.d)},${y(p.lo)}`).join(" ");
    const band =
      pts.map((p, i) => `${i ? "L" : "M"}${x(p.d)},${y(p.hi)}`).join(" ") +
      " " +
      [...pts].reverse().map((p) => `L${x(p.d)},${y(p.lo)}`).join(" ") +
      " Z";
    parts.push(`<path d="${band}" fill="${color}" opacity="0.15"/>`);
    parts.push(`<path d="${upperPath}" fill="none" stroke="${color}" stroke-width="1.8" data-series="${s.label}" data-kind="upper"/>`);
    parts.push(`<path d="${lowerPath}" fill="none" stroke="${color}" stroke-width="1.8" data-series="${s.label}" data-kind="lower"/>`);
    for (const p of pts) {
      parts.push(
        `<circle cx="${x(p.d)}" cy="${y(p.hi)}" r="2.5" fill="${color}" data-delta="${p.d}" data-upper="${p.hi}"/>`,
        `<circle cx="${x(p.d)}" cy="${y(p.lo)}" r="2.5" fill="${color}" data-delta="${p.d}" data-lower="${p.lo}"/>`,
      );
      if (p.ilo !== null && p.ihi !== null) {
        parts.push(
          `<line x1="${x(p.d)}" y1="${y(p.ilo as number)}" x2="${x(p.d)}" y2="${y(p.ihi as number)}" stroke="${color}" stroke-dasharray="2,3" opacity="0.7"/>`,
        );
      }
    }
  });
  // axes
  parts.push(
    `<line x1="${margin}" y1="${height - margin}" x2="${width - margin}" y2="${height - margin}" stroke="#444"/>`,
    `<line x1="${margin}" y1="${margin}" x2="${margin}" y2="${height - margin}" stroke="#444"/>`,
  );
  const dLo = Math.min(...deltas);
  const dHi = Math.max(...deltas);
  for (const d of [dLo, (dLo + dHi) / 2, dHi]) {
    parts.push(
      `<text x="${x(d)}" y="${height - margin + 16}" text-anchor="middle" font-size="10">${fmt(d)}</text>`,
    );
  }
  const vLo = Math.min(...los) - pad;
  const vHi = Math.max(...his) + pad;
  for (const v of [vLo, (vLo + vHi) / 2, vHi]) {
    parts.push(
      `<text x="${margin - 6}" y="${y(v) + 3}" text-anchor="end" font-size="10">${fmt(v)}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}

/** Certified band width per delta; a collapsed band reads as zeros. */
export function bandWidths(rows: BoundsRow[]): number[] {
  return rows
    .filter((r) => r.lower !== null && r.upper !== null)
    .map((r) => (r.upper as number) - (r.lower as number));
}

/** Upper-bound heatmap over a (delta1, delta2) grid. */
export function heatmapSvg(rows: BoundsRow[], options: ChartOptions = {}): string {
  const { width, height, margin } = { ...DEFAULTS, ...options };
  const cells = rows
    .filter((r) => Array.isArray(r.delta) && r.upper !== null)
    .map((r) => ({
      d1: (r.delta as number[])[0],
      d2: (r.delta as number[])[1],
      value: r.upper as number,
    }));
  if (cells.length === 0) {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}"><text x="10" y="20">no grid points</text></svg>`;
  }
  const d1s = [...new Set(cells.map((c) => c.d1))].sort((a, b) => a - b);
  const d2s = [...new Set(cells.map((c) => c.d2))].sort((a, b) => a - b);
  const vLo = Math.min(...cells.map((c) => c.value));
  const vHi = Math.max(...cells.map((c) => c.value));
  const cellW = (width - 2 * margin) / d1s.length;
  const cellH = (height - 2 * margin) / d2s.length;

  const color = (v: number) => {
    const t = vHi > vLo ? (v - vLo) / (vHi - vLo) : 0.5;
    const r = Math.round(255 * t);
    const b = Math.round(255 * (1 - t));
    return `rgb(${r},64,${b})`;
  };

  const parts = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
  ];
  if (options.title) {
    parts.push(`<text x="${width / 2}" y="18" text-anchor="middle" font-size="13">${options.title}</text>`);
  }
  for (const cell of cells) {
    const xi = d1s.indexOf(cell.d1);
    const yi = d2s.indexOf(cell.d2);
    const px = margin + xi * cellW;
    const py = height - margin - (yi + 1) * cellH;
    parts.push(
      `<rect x="${px}" y="${py}" width="${cellW}" height="${cellH}" fill="${color(cell.value)}" ` +
        `data-d1="${cell.d1}" data-d2="${cell.d2}" data-upper="${cell.value}"/>`,
      `<text x="${px + cellW / 2}" y="${py + cellH / 2 + 3}" text-anchor="middle" font-size="9" fill="white">${fmt(cell.value)}</text>`,
    );
  }
  for (const [i, d] of d1s.entries()) {
    parts.push(
      `<text x="${margin + (i + 0.5) * cellW}" y="${height - margin + 14}" text-anchor="middle" font-size="10">${fmt(d)}</text>`,
    );
  }
  for (const [i, d] of d2s.entries()) {
    parts.push(
      `<text x="${margin - 6}" y="${height - margin - (i + 0.5) * cellH + 3}" text-anchor="end" font-size="10">${fmt(d)}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}
