/** Ordinary least squares, used on log-transformed scaling data. */

export interface Fit {
  slope: number;
  intercept: number;
  points: number;
}

export function linearFit(xs: number[], ys: number[]): Fit {
  if (xs.length !== ys.length) {
    throw new Error("x and y lengths differ");
  }
  const n = xs.length;
  if (n < 2) {
    throw new Error(`need at least two points to fit, got ${n}`);
  }
  const mx = xs.reduce((a, b) => a + b, 0) / n;
  const my = ys.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx === 0) {
    throw new Error("degenerate fit: all x values identical");
  }
  const slope = sxy / sxx;
  return { slope, intercept: my - slope * mx, points: n };
}
