/**
 * Phase-transition figure: log-log scatter of the empirical sample
 * complexity against k/m, with a fitted line and optional slope-1 and
 * slope-2 reference lines. The fitted numbers go to a sidecar text file so
 * downstream checks read values, not pixels.
 */

import { asNumber, columnIndex, parseCsv } from "./csv.js";
import { Fit, linearFit } from "./regression.js";
import { RefLine, renderChart, Series } from "./svg.js";

export interface PhaseOptions {
  logAxes: boolean;
  refSlopes: boolean;
}

export interface PhaseResult {
  svg: string;
  sidecar: string;
  fit: Fit;
}

const SWEEP_COLUMNS = [
  "d",
  "k",
  "m",
  "k_over_m",
  "delta",
  "nstar",
  "found",
  "trials",
  "master_seed",
];

export function renderPhase(csvText: string, opts: PhaseOptions): PhaseResult {
  const table = parseCsv(csvText);
  const cols = columnIndex(table, SWEEP_COLUMNS);
  const ratios: number[] = [];
  const nstars: number[] = [];
  for (const row of table.rows) {
    if (row[cols.get("found")!] !== "1") continue;
    // k/m from the full-precision integer columns; the rounded k_over_m
    // column is display-only (six decimals).
    const k = asNumber(row[cols.get("k")!], "k");
    const m = asNumber(row[cols.get("m")!], "m");
    ratios.push(k / m);
    nstars.push(asNumber(row[cols.get("nstar")!], "nstar"));
  }
  if (ratios.length === 0) {
    throw new Error("no data: every sweep point has found=0");
  }
  if (ratios.length < 2) {
    throw new Error(`need at least two found points to fit, got ${ratios.length}`);
  }
  // The fit always runs in log space (the scaling law lives there); the
  // axes of the rendered chart can still be linear on request.
  const fit = linearFit(ratios.map(Math.log), nstars.map(Math.log));

  const sortedIdx = ratios.map((_, i) => i).sort((a, b) => ratios[a] - ratios[b]);
  const xs = sortedIdx.map((i) => ratios[i]);
  const ys = sortedIdx.map((i) => nstars[i]);
  const fitted = xs.map((x) => Math.exp(fit.intercept + fit.slope * Math.log(x)));

  const series: Series[] = [
    { label: "measured n*", xs, ys, color: "#1f77b4", line: false, marker: "circle" },
    { label: `fit slope ${fit.slope.toFixed(2)}`, xs, ys: fitted, color: "#d62728", line: true, marker: "none" },
  ];
  const refLines: RefLine[] = [];
  if (opts.refSlopes) {
    const cx = Math.log(xs[0] * xs[xs.length - 1]) / 2;
    const cy = ys.map(Math.log).reduce((a, b) => a + b, 0) / ys.length;
    const xSpanLo = Math.log(xs[0]);
    const xSpanHi = Math.log(xs[xs.length - 1]);
    for (const slope of [1, 2]) {
      refLines.push({
        label: `slope ${slope}`,
        x1: Math.exp(xSpanLo),
        y1: Math.exp(cy + slope * (xSpanLo - cx)),
        x2: Math.exp(xSpanHi),
        y2: Math.exp(cy + slope * (xSpanHi - cx)),
        color: slope === 1 ? "#999999" : "#444444",
      });
    }
  }
  const svg = renderChart({
    title: "Sample complexity versus k/m",
    xLabel: "k/m",
    yLabel: "n*",
    xLog: opts.logAxes,
    yLog: opts.logAxes,
    series,
    refLines,
  });
  const sidecar = [
    "kind=phase",
    `points=${fit.points}`,
    `slope=${fit.slope.toPrecision(12)}`,
    `intercept=${fit.intercept.toPrecision(12)}`,
    `ref_slopes=${opts.refSlopes ? "1,2" : "none"}`,
    `axes=${opts.logAxes ? "loglog" : "linear"}`,
  ].join("\n") + "\n";
  return { svg, sidecar, fit };
}
