/**
 * Tail-overlay figure: per probe group (lemma, n, m), semilog-y curves of
 * the empirical exceedance frequency (with 3-sigma error bars) and the
 * analytic bound against the threshold t. Nothing is recomputed from raw
 * data; the renderer only re-derives each row's pass flag from the columns
 * already present and reports any disagreement with the stored flag.
 */

import { asNumber, columnIndex, parseCsv } from "./csv.js";
import { renderChart, Series } from "./svg.js";

export interface TailsResult {
  svg: string;
  sidecar: string;
  discrepancies: number;
}

const BOUND_COLUMNS = ["lemma", "n", "m", "t", "empirical", "std_err", "analytic", "pass"];

interface Row {
  lemma: string;
  n: number;
  m: number;
  t: number;
  empirical: number;
  stdErr: number;
  analytic: number;
  pass: boolean;
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];

export function renderTails(csvText: string): TailsResult {
  const table = parseCsv(csvText);
  const cols = columnIndex(table, BOUND_COLUMNS);
  const rows: Row[] = table.rows.map((r) => ({
    lemma: r[cols.get("lemma")!],
    n: asNumber(r[cols.get("n")!], "n"),
    m: asNumber(r[cols.get("m")!], "m"),
    t: asNumber(r[cols.get("t")!], "t"),
    empirical: asNumber(r[cols.get("empirical")!], "empirical"),
    stdErr: asNumber(r[cols.get("std_err")!], "std_err"),
    analytic: asNumber(r[cols.get("analytic")!], "analytic"),
    pass: r[cols.get("pass")!] === "1",
  }));
  if (rows.length === 0) {
    throw new Error("no data: the verification CSV has no rows");
  }

  const groups = new Map<string, Row[]>();
  for (const row of rows) {
    const key = `${row.lemma} n=${row.n} m=${row.m}`;
    const bucket = groups.get(key) ?? [];
    bucket.push(row);
    groups.set(key, bucket);
  }

  const failing: Row[] = [];
  let discrepancies = 0;
  for (const row of rows) {
    const replayed = row.empirical <= row.analytic + 3 * row.stdErr;
    if (replayed !== row.pass) discrepancies += 1;
    if (!row.pass) failing.push(row);
  }

  const series: Series[] = [];
  let colorAt = 0;
  for (const [key, bucket] of groups) {
    bucket.sort((a, b) => a.t - b.t);
    const color = PALETTE[colorAt % PALETTE.length];
    colorAt += 1;
    series.push({
      label: `${key} empirical`,
      xs: bucket.map((r) => r.t),
      ys: bucket.map((r) => r.empirical),
      yErr: bucket.map((r) => 3 * r.stdErr),
      color,
      line: bucket.length > 1,
      marker: "circle",
    });
    series.push({
      label: `${key} bound`,
      xs: bucket.map((r) => r.t),
      ys: bucket.map((r) => r.analytic),
      color,
      line: bucket.length > 1,
      marker: "none",
    });
  }
  if (failing.length > 0) {
    series.push({
      label: "failing points",
      xs: failing.map((r) => r.t),
      ys: failing.map((r) => r.empirical),
      color: "#000000",
      line: false,
      marker: "cross",
    });
  }

  const svg = renderChart({
    title: "Empirical tails versus analytic bounds",
    xLabel: "t",
    yLabel: "exceedance probability",
    xLog: false,
    yLog: true,
    series,
    logFloor: 1e-8,
  });
  const lines = [
    "kind=tails",
    `groups=${groups.size}`,
    `rows=${rows.length}`,
    `discrepancies=${discrepancies}`,
    `failing_rows=${failing.length}`,
  ];
  for (const row of failing) {
    lines.push(`failing=${row.lemma},${row.n},${row.m},${row.t}`);
  }
  return { svg, sidecar: lines.join("\n") + "\n", discrepancies };
}
