/** Small SVG assembly helpers; no DOM, just strings. */

export type Attrs = Record<string, string | number>;

export function el(tag: string, attrs: Attrs, children: string[] = []): string {
  const parts = Object.entries(attrs).map(([k, v]) => `${k}="${v}"`);
  const open = parts.length > 0 ? `<${tag} ${parts.join(" ")}` : `<${tag}`;
  if (children.length === 0) return `${open}/>`;
  return `${open}>${children.join("")}</${tag}>`;
}

export function text(x: number, y: number, content: string, attrs: Attrs = {}): string {
  const escaped = content
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
  return el("text", { x: round(x), y: round(y), ...attrs }, [escaped]);
}

export function svgDocument(width: number, height: number, children: string[]): string {
  return el(
    "svg",
    {
      xmlns: "http://www.w3.org/2000/svg",
      width,
      height,
      viewBox: `0 0 ${width} ${height}`,
      "font-family": "sans-serif",
    },
    [el("rect", { width, height, fill: "#ffffff" }), ...children],
  );
}

export function round(v: number): number {
  return Math.round(v * 100) / 100;
}

export function polylinePoints(xs: number[], ys: number[]): string {
  return xs.map((x, i) => `${round(x)},${round(ys[i])}`).join(" ");
}

/** Closed band outline: along the upper edge, back along the lower edge. */
export function bandPath(xs: number[], upper: number[], lower: number[]): string {
  const fwd = xs.map((x, i) => `${round(x)},${round(upper[i])}`);
  const back = [...xs.keys()].reverse().map((i) => `${round(xs[i])},${round(lower[i])}`);
  return `M${fwd.join(" L")} L${back.join(" L")} Z`;
}

/** Round tick positions covering [min, max], roughly `count` of them. */
export function niceTicks(min: number, max: number, count = 5): number[] {
  if (!(max > min)) return [min];
  const rawStep = (max - min) / count;
  const power = Math.floor(Math.log10(rawStep));
  const base = 10 ** power;
  const step = [1, 2, 5, 10].map((m) => m * base).find((s) => s >= rawStep) ?? 10 * base;
  const first = Math.ceil(min / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= max + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

export function formatTick(v: number): string {
  const abs = Math.abs(v);
  if (abs >= 1e6) return trimZeros(v / 1e6) + "M";
  if (abs >= 1e4) return trimZeros(v / 1e3) + "k";
  if (abs >= 1 || v === 0) return trimZeros(v);
  return v.toPrecision(2);
}

function trimZeros(v: number): string {
  return String(Math.round(v * 100) / 100);
}

// Perceptually uniform dark-to-bright ramp, interpolated between anchors.
const RAMP: [number, number, number][] = [
  [68, 1, 84],
  [71, 44, 122],
  [59, 81, 139],
  [44, 113, 142],
  [33, 144, 141],
  [39, 173, 129],
  [92, 200, 99],
  [170, 220, 50],
  [253, 231, 37],
];

/** Color for t in [0, 1]; values outside are clamped. */
export function rampColor(t: number): string {
  const clamped = Math.min(1, Math.max(0, t));
  const pos = clamped * (RAMP.length - 1);
  const lo = Math.floor(pos);
  const hi = Math.min(RAMP.length - 1, lo + 1);
  const f = pos - lo;
  const ch = (i: number) => Math.round(RAMP[lo][i] + f * (RAMP[hi][i] - RAMP[lo][i]));
  return `rgb(${ch(0)},${ch(1)},${ch(2)})`;
}

export const SERIES_COLORS = [
  "#4c78a8",
  "#f58518",
  "#54a24b",
  "#e45756",
  "#72b7b2",
  "#9d755d",
  "#b279a2",
];
