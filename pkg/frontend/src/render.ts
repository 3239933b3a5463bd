/**
 * Figure rendering: one line per algorithm with a shaded confidence band,
 * logarithmic error axis by default. Output is plain SVG text and a pure
 * function of the parsed rows, so identical inputs give identical bytes.
 */

import { PoeRow } from "./csv.js";
import { linearScale, logScale, Scale } from "./scale.js";

export interface FigureSpec {
  rows: PoeRow[];
  instance?: string;
  logy: boolean;
  width?: number;
  height?: number;
}

const PALETTE = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

const MARGIN = { top: 24, right: 160, bottom: 46, left: 64 };

function fmt(value: number): string {
  if (!Number.isFinite(value)) return "0";
  return Number(value.toFixed(3)).toString();
}

function fmtTick(value: number): string {
  if (value !== 0 && (Math.abs(value) < 1e-3 || Math.abs(value) >= 1e4)) {
    return value.toExponential(0).replace("+", "");
  }
  return Number(value.toPrecision(6)).toString();
}

export function renderPoeFigure(spec: FigureSpec): string {
  let rows = spec.rows;
  if (spec.instance !== undefined) {
    rows = rows.filter((r) => r.instance === spec.instance);
  }
  if (rows.length === 0) {
    throw new Error("no rows to plot (instance filter too strict or empty input)");
  }

  const algorithms = [...new Set(rows.map((r) => r.algorithm))].sort();
  const series = algorithms.map((name) =>
    rows.filter((r) => r.algorithm === name).sort((a, b) => a.t - b.t)
  );

  const width = spec.width ?? 800;
  const height = spec.height ?? 480;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const ts = rows.map((r) => r.t);
  const tLo = Math.min(...ts);
  const tHi = Math.max(...ts);
  const x = linearScale(tLo, tHi, MARGIN.left, MARGIN.left + plotW);

  // zero error estimates cannot sit on a log axis: clamp them to half the
  // smallest positive plotted value
  const positives = rows
    .flatMap((r) => [r.poe, r.ciLow, r.ciHigh])
    .filter((v) => v > 0);
  const floor = positives.length > 0 ? Math.min(...positives) / 2 : 1e-6;
  const clamp = (v: number) => (v > 0 ? v : floor);

  let y: Scale;
  if (spec.logy) {
    const hi = Math.max(...rows.map((r) => clamp(r.ciHigh)), floor * 2);
    y = logScale(floor, Math.max(hi, 1), MARGIN.top + plotH, MARGIN.top);
  } else {
    y = linearScale(0, 1, MARGIN.top + plotH, MARGIN.top);
  }

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);

  // axes and ticks
  const axisY = MARGIN.top + plotH;
  parts.push(
    `<line x1="${MARGIN.left}" y1="${axisY}" x2="${MARGIN.left + plotW}" y2="${axisY}" stroke="black"/>`
  );
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${axisY}" stroke="black"/>`
  );
  for (const tick of x.ticks()) {
    const px = fmt(x.map(tick));
    parts.push(`<line x1="${px}" y1="${axisY}" x2="${px}" y2="${axisY + 5}" stroke="black"/>`);
    parts.push(
      `<text x="${px}" y="${axisY + 18}" font-size="11" text-anchor="middle">${fmtTick(tick)}</text>`
    );
  }
  for (const tick of y.ticks()) {
    const py = fmt(y.map(tick));
    parts.push(`<line x1="${MARGIN.left - 5}" y1="${py}" x2="${MARGIN.left}" y2="${py}" stroke="black"/>`);
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${py}" font-size="11" text-anchor="end" dominant-baseline="middle">${fmtTick(tick)}</text>`
    );
    parts.push(
      `<line x1="${MARGIN.left}" y1="${py}" x2="${MARGIN.left + plotW}" y2="${py}" stroke="#dddddd" stroke-dasharray="3,3"/>`
    );
  }
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${height - 10}" font-size="13" text-anchor="middle">rounds t</text>`
  );
  parts.push(
    `<text x="16" y="${MARGIN.top + plotH / 2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 ${MARGIN.top + plotH / 2})">probability of error</text>`
  );

  // confidence bands then lines, so lines stay visible
  series.forEach((data, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const upper = data.map((r) => `${fmt(x.map(r.t))},${fmt(y.map(clamp(r.ciHigh)))}`);
    const lower = [...data]
      .reverse()
      .map((r) => `${fmt(x.map(r.t))},${fmt(y.map(clamp(r.ciLow)))}`);
    parts.push(
      `<polygon points="${upper.concat(lower).join(" ")}" fill="${color}" fill-opacity="0.15" stroke="none"/>`
    );
  });
  series.forEach((data, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const points = data.map((r) => `${fmt(x.map(r.t))},${fmt(y.map(clamp(r.poe)))}`).join(" ");
    parts.push(
      `<polyline points="${points}" fill="none" stroke="${color}" stroke-width="1.8" class="series" data-algorithm="${algorithms[idx]}"/>`
    );
  });

  // legend
  algorithms.forEach((name, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const ly = MARGIN.top + 14 + idx * 18;
    const lx = MARGIN.left + plotW + 12;
    parts.push(`<line x1="${lx}" y1="${ly}" x2="${lx + 22}" y2="${ly}" stroke="${color}" stroke-width="2"/>`);
    parts.push(`<text x="${lx + 28}" y="${ly + 4}" font-size="12">${name}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
