/** Canvas heatmap for the lambda preview grid. */

// dark violet through green to yellow, the usual perceptual ramp stops
const STOPS: Array<[number, number, number]> = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

/** Colour for t in [0, 1]; out-of-range values clamp to the ends. */
export function rampColor(t: number): [number, number, number] {
  const u = Math.min(1, Math.max(0, t)) * (STOPS.length - 1);
  const i = Math.min(STOPS.length - 2, Math.floor(u));
  const f = u - i;
  const a = STOPS[i];
  const b = STOPS[i + 1];
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

/** values[i][j] is the cell at x index i, y index j; y is drawn upward. */
export function drawHeatmap(
  canvas: HTMLCanvasElement,
  values: number[][],
  lo: number,
  hi: number,
): void {
  const M = values.length;
  const N = values[0]?.length ?? 0;
  const ctx = canvas.getContext("2d");
  if (!ctx || M === 0 || N === 0) return;
  const image = ctx.createImageData(M, N);
  const span = hi > lo ? hi - lo : 1;
  for (let j = 0; j < N; j++) {
    for (let i = 0; i < M; i++) {
      const [r, g, b] = rampColor((values[i][j] - lo) / span);
      const px = 4 * ((N - 1 - j) * M + i);
      image.data[px] = r;
      image.data[px + 1] = g;
      image.data[px + 2] = b;
      image.data[px + 3] = 255;
    }
  }
  // paint at grid resolution, then let the canvas scale it up
  const off = document.createElement("canvas");
  off.width = M;
  off.height = N;
  off.getContext("2d")!.putImageData(image, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}
