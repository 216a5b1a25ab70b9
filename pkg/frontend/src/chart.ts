/** Minimal canvas line charts: enough for curve matching, nothing more. */

export interface Series {
  values: number[];
  color: string;
  width?: number;
}

/** Joint [min, max] over the finite entries, widened if degenerate. */
export function finiteExtent(arrays: number[][]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const arr of arrays) {
    for (const v of arr) {
      if (!Number.isFinite(v)) continue;
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (lo > hi) return [0, 1];
  if (lo === hi) return [lo - 1, hi + 1];
  return [lo, hi];
}

export function scaleLinear(d0: number, d1: number, r0: number, r1: number): (v: number) => number {
  const span = d1 - d0;
  return (v) => (span === 0 ? (r0 + r1) / 2 : r0 + ((v - d0) / span) * (r1 - r0));
}

/** Tick positions at a round step (1, 2 or 5 times a power of ten). */
export function ticks(lo: number, hi: number, want = 5): number[] {
  if (!(hi > lo)) return [lo];
  const raw = (hi - lo) / want;
  const mag = 10 ** Math.floor(Math.log10(raw));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => (hi - lo) / s <= want) ?? 10 * mag;
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

export function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0);
  return String(parseFloat(v.toPrecision(6)));
}

const MARGIN = { left: 46, right: 10, top: 10, bottom: 26 };

export function drawChart(canvas: HTMLCanvasElement, x: number[], series: Series[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const [x0, x1] = finiteExtent([x]);
  const [y0, y1] = finiteExtent(series.map((s) => s.values));
  const sx = scaleLinear(x0, x1, MARGIN.left, width - MARGIN.right);
  const sy = scaleLinear(y0, y1, height - MARGIN.bottom, MARGIN.top);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.lineWidth = 1;
  ctx.strokeRect(
    MARGIN.left,
    MARGIN.top,
    width - MARGIN.left - MARGIN.right,
    height - MARGIN.top - MARGIN.bottom,
  );
  ctx.textAlign = "center";
  for (const t of ticks(x0, x1)) {
    const px = sx(t);
    ctx.beginPath();
    ctx.moveTo(px, height - MARGIN.bottom);
    ctx.lineTo(px, height - MARGIN.bottom + 4);
    ctx.stroke();
    ctx.fillText(fmtTick(t), px, height - MARGIN.bottom + 16);
  }
  ctx.textAlign = "right";
  for (const t of ticks(y0, y1)) {
    const py = sy(t);
    ctx.beginPath();
    ctx.moveTo(MARGIN.left - 4, py);
    ctx.lineTo(MARGIN.left, py);
    ctx.stroke();
    ctx.fillText(fmtTick(t), MARGIN.left - 6, py + 4);
  }

  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.width ?? 1.5;
    ctx.beginPath();
    let pen = false;
    for (let i = 0; i < x.length; i++) {
      const v = s.values[i];
      if (!Number.isFinite(v)) {
        pen = false;
        continue;
      }
      const px = sx(x[i]);
      const py = sy(v);
      if (pen) {
        ctx.lineTo(px, py);
      } else {
        ctx.moveTo(px, py);
        pen = true;
      }
    }
    ctx.stroke();
  }
}
