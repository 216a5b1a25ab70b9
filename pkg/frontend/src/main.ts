import { ApiError, TunerApi, latestWins } from "./api.js";
import type { Params, SummaryCurve } from "./api.js";
import { debounce } from "./debounce.js";
import { drawChart } from "./chart.js";
import { drawHeatmap } from "./heatmap.js";

const EMPIRICAL = "#000000";
const THEORETICAL = "#e66100";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

/** Engine location: ?api=... override, else same origin, else the CLI default port. */
function apiBase(): string {
  const override = new URLSearchParams(window.location.search).get("api");
  if (override) return override.replace(/\/+$/, "");
  if (window.location.protocol === "file:") return "http://127.0.0.1:8717";
  return window.location.origin;
}

const base = apiBase();
const api = new TunerApi(base);
el("base").textContent = base;

const banner = el<HTMLDivElement>("banner");

function showError(message: string): void {
  banner.textContent = message;
  banner.hidden = false;
}

function clearError(): void {
  banner.hidden = true;
}

function showFailure(exc: unknown): void {
  if (exc instanceof ApiError) showError(exc.message);
  else showError(exc instanceof Error ? exc.message : String(exc));
}

function fmt(v: number): string {
  return Number.isFinite(v) ? String(Number(v.toPrecision(6))) : String(v);
}

function flash(node: HTMLElement): void {
  node.textContent = "saved";
  setTimeout(() => {
    node.textContent = "";
  }, 1500);
}

interface Bound {
  get(): number;
  set(v: number): void;
}

/**
 * A slider and a number box showing the same value. The box is the source
 * of truth: it keeps full precision where the slider quantises to its step,
 * so typed-in optima reach the engine exactly.
 */
function bindPair(id: string, onchange: () => void): Bound {
  const slider = el<HTMLInputElement>(id);
  const box = el<HTMLInputElement>(`${id}-box`);
  slider.addEventListener("input", () => {
    box.value = slider.value;
    onchange();
  });
  box.addEventListener("input", () => {
    slider.value = box.value;
    onchange();
  });
  return {
    get: () => Number(box.value),
    set: (v) => {
      box.value = String(v);
      slider.value = String(v);
    },
  };
}

const kindSel = el<HTMLSelectElement>("kind");
const familySel = el<HTMLSelectElement>("family");
const spatialCanvas = el<HTMLCanvasElement>("spatial-chart");
const thetaCanvas = el<HTMLCanvasElement>("theta-chart");
const lambdaCanvas = el<HTMLCanvasElement>("lambda-chart");
const contrastOut = el("contrast");
const residualOut = el("residual");
const lambdaStats = el("lambda-stats");

const onSpatialChange = debounce(() => void refreshSpatial());
const onThetaChange = debounce(() => void refreshTheta());
const onLambdaChange = debounce(() => void refreshLambda(bandwidth.get(), adjust.get()));

const sigma = bindPair("sigma", onSpatialChange);
const phi = bindPair("phi", onSpatialChange);
const nu = bindPair("nu", onSpatialChange);
const theta = bindPair("theta", onThetaChange);
const bandwidth = bindPair("bandwidth", onLambdaChange);
const adjust = bindPair("adjust", onLambdaChange);

// empirical curves never change while the server runs; fetch each kind once
const summaries = new Map<string, SummaryCurve>();

async function empirical(kind: string): Promise<SummaryCurve> {
  let cached = summaries.get(kind);
  if (!cached) {
    cached = await api.getSummary(kind);
    summaries.set(kind, cached);
  }
  return cached;
}

// sliders fire faster than the engine answers; newest request wins
const fetchSpatial = latestWins((signal) =>
  api.getTheoretical(
    {
      kind: kindSel.value,
      family: familySel.value,
      sigma: sigma.get(),
      phi: phi.get(),
      nu: nu.get(),
    },
    signal,
  ),
);

const fetchTheta = latestWins((signal) =>
  api.getTheoretical({ kind: "acf", theta: theta.get() }, signal),
);

const fetchPreview = latestWins((signal, bw: number | undefined, adj: number) =>
  api.getLambdaPreview(bw, adj, signal),
);

async function refreshSpatial(): Promise<void> {
  try {
    const emp = await empirical(kindSel.value);
    const theo = await fetchSpatial();
    if (theo === null) return; // a newer request took over
    drawChart(spatialCanvas, emp.x, [
      { values: emp.empirical, color: EMPIRICAL },
      { values: theo.values, color: THEORETICAL, width: 2 },
    ]);
    contrastOut.textContent = String(theo.contrast);
    clearError();
  } catch (exc) {
    showFailure(exc);
  }
}

async function refreshTheta(): Promise<void> {
  try {
    const emp = await empirical("acf");
    const theo = await fetchTheta();
    if (theo === null) return;
    drawChart(thetaCanvas, emp.x, [
      { values: emp.empirical, color: EMPIRICAL },
      { values: theo.values, color: THEORETICAL, width: 2 },
    ]);
    residualOut.textContent = String(theo.residual);
    clearError();
  } catch (exc) {
    showFailure(exc);
  }
}

let bandwidthScaled = false;

function scaleBandwidthSlider(bw: number): void {
  if (bandwidthScaled || !(bw > 0)) return;
  bandwidthScaled = true;
  const slider = el<HTMLInputElement>("bandwidth");
  slider.min = String(bw / 10);
  slider.max = String(bw * 5);
  slider.step = String(bw / 100);
}

async function refreshLambda(bw: number | undefined, adj: number): Promise<void> {
  try {
    const preview = await fetchPreview(bw, adj);
    if (preview === null) return;
    scaleBandwidthSlider(preview.bandwidth);
    if (bw === undefined) bandwidth.set(preview.bandwidth); // echo of the engine default
    lambdaCanvas.height = Math.min(
      480,
      Math.max(80, Math.round((lambdaCanvas.width * preview.N) / preview.M)),
    );
    drawHeatmap(lambdaCanvas, preview.values, preview.min, preview.max);
    lambdaStats.textContent =
      `min ${fmt(preview.min)}  max ${fmt(preview.max)}  max/min ${fmt(preview.ratio)}`;
    clearError();
  } catch (exc) {
    showFailure(exc);
  }
}

function syncNuEnabled(): void {
  const on = familySel.value === "matern";
  el<HTMLInputElement>("nu").disabled = !on;
  el<HTMLInputElement>("nu-box").disabled = !on;
}

async function save(status: HTMLElement): Promise<void> {
  try {
    const saved = await api.saveParams({
      sigma: sigma.get(),
      phi: phi.get(),
      theta: theta.get(),
      family: familySel.value,
      nu: nu.get(),
      bandwidth: bandwidth.get(),
      adjust: adjust.get(),
    });
    applyParams(saved);
    clearError();
    flash(status);
  } catch (exc) {
    showFailure(exc);
  }
}

function applyParams(params: Partial<Params>): void {
  if (params.sigma !== undefined) sigma.set(params.sigma);
  if (params.phi !== undefined) phi.set(params.phi);
  if (params.theta !== undefined) theta.set(params.theta);
  if (params.nu !== undefined) nu.set(params.nu);
  if (params.family !== undefined) familySel.value = params.family;
  if (params.bandwidth !== undefined) bandwidth.set(params.bandwidth);
  if (params.adjust !== undefined) adjust.set(params.adjust);
  syncNuEnabled();
}

kindSel.addEventListener("change", () => void refreshSpatial());
familySel.addEventListener("change", () => {
  syncNuEnabled();
  void refreshSpatial();
});
el("save-spatial").addEventListener("click", () => void save(el("save-spatial-status")));
el("save-theta").addEventListener("click", () => void save(el("save-theta-status")));
el("save-lambda").addEventListener("click", () => void save(el("save-lambda-status")));

async function init(): Promise<void> {
  sigma.set(1);
  phi.set(1);
  nu.set(1);
  theta.set(1);
  adjust.set(1);
  let saved: Partial<Params> = {};
  try {
    saved = await api.getParams();
  } catch (exc) {
    showFailure(exc);
  }
  applyParams(saved);
  // an omitted bandwidth makes the engine answer with its default, which
  // then seeds the slider
  await refreshLambda(saved.bandwidth, adjust.get());
  await refreshSpatial();
  await refreshTheta();
}

void init();
