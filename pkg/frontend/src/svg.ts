/**
 * Minimal deterministic SVG chart rendering: scatter/line series on linear
 * or log axes, optional error bars and reference lines. No timestamps, fixed
 * canvas geometry, fixed number formatting, so identical inputs give
 * identical bytes.
 */

export interface Series {
  label: string;
  xs: number[];
  ys: number[];
  /** Half-lengths of vertical error bars, same length as ys. */
  yErr?: number[];
  color: string;
  line: boolean;
  marker: "circle" | "cross" | "none";
}

export interface RefLine {
  label: string;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  color: string;
}

export interface ChartOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  xLog: boolean;
  yLog: boolean;
  series: Series[];
  refLines?: RefLine[];
  width?: number;
  height?: number;
  /** Floor applied to values before log scaling (log axes only). */
  logFloor?: number;
}

const MARGIN = { left: 64, right: 16, top: 28, bottom: 44 };

function fmt(value: number): string {
  return value.toFixed(2);
}

function fmtTick(value: number): string {
  const abs = Math.abs(value);
  if (abs !== 0 && (abs >= 10000 || abs < 0.01)) {
    return value.toExponential(0);
  }
  return String(Number(value.toPrecision(3)));
}

class Scale {
  constructor(
    private readonly log: boolean,
    private readonly lo: number,
    private readonly hi: number,
    private readonly outLo: number,
    private readonly outHi: number,
  ) {}

  private transform(v: number): number {
    return this.log ? Math.log10(v) : v;
  }

  apply(v: number): number {
    const t = this.transform(v);
    const a = this.transform(this.lo);
    const b = this.transform(this.hi);
    const frac = b === a ? 0.5 : (t - a) / (b - a);
    return this.outLo + frac * (this.outHi - this.outLo);
  }

  ticks(): number[] {
    if (this.log) {
      const lo = Math.ceil(Math.log10(this.lo) - 1e-9);
      const hi = Math.floor(Math.log10(this.hi) + 1e-9);
      const out: number[] = [];
      for (let e = lo; e <= hi; e++) out.push(Math.pow(10, e));
      if (out.length >= 2) return out;
      return [this.lo, this.hi];
    }
    const span = this.hi - this.lo;
    if (span <= 0) return [this.lo];
    const rawStep = span / 4;
    const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
    const step = [1, 2, 5, 10].map((s) => s * mag).find((s) => span / s <= 5) ?? 10 * mag;
    const out: number[] = [];
    for (let v = Math.ceil(this.lo / step) * step; v <= this.hi + 1e-12; v += step) {
      out.push(Number(v.toPrecision(12)));
    }
    return out;
  }
}

function dataBounds(values: number[], log: boolean, floor: number): [number, number] {
  const usable = values.filter((v) => Number.isFinite(v)).map((v) => (log ? Math.max(v, floor) : v));
  if (usable.length === 0) throw new Error("no finite data to plot");
  let lo = Math.min(...usable);
  let hi = Math.max(...usable);
  if (lo === hi) {
    lo = log ? lo / 2 : lo - 1;
    hi = log ? hi * 2 : hi + 1;
  } else if (log) {
    lo /= 1.3;
    hi *= 1.3;
  } else {
    const pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  return [lo, hi];
}

export function renderChart(opts: ChartOptions): string {
  const width = opts.width ?? 560;
  const height = opts.height ?? 400;
  const floor = opts.logFloor ?? 1e-8;
  const xsAll: number[] = [];
  const ysAll: number[] = [];
  for (const s of opts.series) {
    xsAll.push(...s.xs);
    s.ys.forEach((y, i) => {
      ysAll.push(y);
      if (s.yErr) {
        ysAll.push(y + s.yErr[i]);
        if (!opts.yLog || y - s.yErr[i] > 0) ysAll.push(y - s.yErr[i]);
      }
    });
  }
  for (const r of opts.refLines ?? []) {
    xsAll.push(r.x1, r.x2);
    ysAll.push(r.y1, r.y2);
  }
  const [xLo, xHi] = dataBounds(xsAll, opts.xLog, floor);
  const [yLo, yHi] = dataBounds(ysAll, opts.yLog, floor);
  const sx = new Scale(opts.xLog, xLo, xHi, MARGIN.left, width - MARGIN.right);
  const sy = new Scale(opts.yLog, yLo, yHi, height - MARGIN.bottom, MARGIN.top);
  const clampY = (v: number) => (opts.yLog ? Math.max(v, floor) : v);
  const clampX = (v: number) => (opts.xLog ? Math.max(v, floor) : v);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="18" text-anchor="middle" font-size="13">${opts.title}</text>`,
  );

  const axisY = height - MARGIN.bottom;
  parts.push(
    `<line x1="${MARGIN.left}" y1="${axisY}" x2="${width - MARGIN.right}" y2="${axisY}" stroke="black"/>`,
  );
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${axisY}" stroke="black"/>`,
  );
  for (const t of sx.ticks()) {
    if (t < xLo || t > xHi) continue;
    const px = sx.apply(t);
    parts.push(`<line x1="${fmt(px)}" y1="${axisY}" x2="${fmt(px)}" y2="${axisY + 4}" stroke="black"/>`);
    parts.push(
      `<text x="${fmt(px)}" y="${axisY + 16}" text-anchor="middle" font-size="10">${fmtTick(t)}</text>`,
    );
  }
  for (const t of sy.ticks()) {
    if (t < yLo || t > yHi) continue;
    const py = sy.apply(t);
    parts.push(`<line x1="${MARGIN.left - 4}" y1="${fmt(py)}" x2="${MARGIN.left}" y2="${fmt(py)}" stroke="black"/>`);
    parts.push(
      `<text x="${MARGIN.left - 7}" y="${fmt(py + 3)}" text-anchor="end" font-size="10">${fmtTick(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${(MARGIN.left + width - MARGIN.right) / 2}" y="${height - 8}" text-anchor="middle" font-size="11">${opts.xLabel}</text>`,
  );
  parts.push(
    `<text x="14" y="${(MARGIN.top + axisY) / 2}" text-anchor="middle" font-size="11" ` +
      `transform="rotate(-90 14 ${(MARGIN.top + axisY) / 2})">${opts.yLabel}</text>`,
  );

  for (const ref of opts.refLines ?? []) {
    parts.push(
      `<line x1="${fmt(sx.apply(clampX(ref.x1)))}" y1="${fmt(sy.apply(clampY(ref.y1)))}" ` +
        `x2="${fmt(sx.apply(clampX(ref.x2)))}" y2="${fmt(sy.apply(clampY(ref.y2)))}" ` +
        `stroke="${ref.color}" stroke-dasharray="5,4"/>`,
    );
  }

  for (const s of opts.series) {
    const px = s.xs.map((x) => sx.apply(clampX(x)));
    const py = s.ys.map((y) => sy.apply(clampY(y)));
    if (s.yErr) {
      for (let i = 0; i < px.length; i++) {
        const top = sy.apply(clampY(s.ys[i] + s.yErr[i]));
        const bottom = sy.apply(clampY(Math.max(s.ys[i] - s.yErr[i], opts.yLog ? floor : -Infinity)));
        parts.push(
          `<line x1="${fmt(px[i])}" y1="${fmt(top)}" x2="${fmt(px[i])}" y2="${fmt(bottom)}" stroke="${s.color}" stroke-width="1"/>`,
        );
      }
    }
    if (s.line && px.length > 1) {
      const d = px.map((x, i) => `${i === 0 ? "M" : "L"}${fmt(x)},${fmt(py[i])}`).join(" ");
      parts.push(`<path d="${d}" fill="none" stroke="${s.color}" stroke-width="1.5"/>`);
    }
    if (s.marker === "circle") {
      for (let i = 0; i < px.length; i++) {
        parts.push(`<circle cx="${fmt(px[i])}" cy="${fmt(py[i])}" r="3" fill="${s.color}"/>`);
      }
    } else if (s.marker === "cross") {
      for (let i = 0; i < px.length; i++) {
        const x = px[i];
        const y = py[i];
        parts.push(
          `<path d="M${fmt(x - 3)},${fmt(y - 3)} L${fmt(x + 3)},${fmt(y + 3)} ` +
            `M${fmt(x - 3)},${fmt(y + 3)} L${fmt(x + 3)},${fmt(y - 3)}" stroke="${s.color}" stroke-width="1.5"/>`,
        );
      }
    }
  }

  let legendY = MARGIN.top + 6;
  for (const s of opts.series) {
    parts.push(
      `<rect x="${width - MARGIN.right - 150}" y="${legendY - 8}" width="10" height="10" fill="${s.color}"/>`,
    );
    parts.push(
      `<text x="${width - MARGIN.right - 136}" y="${legendY + 1}" font-size="10">${s.label}</text>`,
    );
    legendY += 14;
  }

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
