/** Order statistics and grid interpolation for seed aggregation. */

/**
 * Quantile with linear interpolation between order statistics.
 *
 * For p in [0, 1] the value sits at rank (n - 1) * p of the sorted sample,
 * so quantile(x, 0.5) is the usual median and five seeds put the quartiles
 * exactly on the second and fourth values.
 */
export function quantile(values: number[], p: number): number {
  if (values.length === 0) throw new Error("quantile of an empty sample");
  if (p < 0 || p > 1) throw new Error(`quantile level ${p} outside [0, 1]`);
  const sorted = [...values].sort((a, b) => a - b);
  const rank = (sorted.length - 1) * p;
  const lo = Math.floor(rank);
  const hi = Math.ceil(rank);
  if (lo === hi) return sorted[lo];
  return sorted[lo] + (rank - lo) * (sorted[hi] - sorted[lo]);
}

export function median(values: number[]): number {
  return quantile(values, 0.5);
}

/**
 * Sample y at position x by linear interpolation over (xs, ys).
 *
 * xs must be strictly increasing. Positions outside the sampled range hold
 * the nearest endpoint value rather than extrapolating.
 */
export function interpolate(xs: number[], ys: number[], x: number): number {
  if (xs.length !== ys.length || xs.length === 0) {
    throw new Error("interpolate needs matching non-empty xs and ys");
  }
  if (x <= xs[0]) return ys[0];
  if (x >= xs[xs.length - 1]) return ys[ys.length - 1];
  let lo = 0;
  let hi = xs.length - 1;
  while (hi - lo > 1) {
    const mid = (lo + hi) >> 1;
    if (xs[mid] <= x) lo = mid;
    else hi = mid;
  }
  const t = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

/** Sorted union of several increasing grids. */
export function unionGrid(grids: number[][]): number[] {
  const seen = new Set<number>();
  for (const grid of grids) for (const x of grid) seen.add(x);
  return [...seen].sort((a, b) => a - b);
}
