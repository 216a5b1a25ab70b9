/** Typed client for the engine's tuner endpoints. */

export interface SummaryCurve {
  kind: string;
  x_name: string;
  x: number[];
  empirical: number[];
}

export interface TheoreticalCurve {
  kind: string;
  x: number[];
  values: number[];
  contrast?: number;
  residual?: number;
}

export interface LambdaPreview {
  M: number;
  N: number;
  stride: number;
  cellwidth: number;
  x0: number;
  y0: number;
  bandwidth: number;
  adjust: number;
  values: number[][];
  min: number;
  max: number;
  ratio: number;
}

export interface Params {
  sigma: number;
  phi: number;
  theta: number;
  family: string;
  nu: number;
  bandwidth?: number;
  adjust?: number;
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = "ApiError";
  }
}

// structural subset of Response / fetch, so tests can inject a fake
export interface HttpResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  url: string,
  init?: {
    method?: string;
    headers?: Record<string, string>;
    body?: string;
    signal?: AbortSignal;
  },
) => Promise<HttpResponse>;

/** The server reports failures as {detail: {message}} or {detail: "..."}. */
async function errorMessage(res: HttpResponse): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: { message?: string } | string };
    if (typeof body.detail === "string") return body.detail;
    if (body.detail && typeof body.detail.message === "string") return body.detail.message;
  } catch {
    // body was not JSON; fall through to the generic message
  }
  return `request failed with status ${res.status}`;
}

export class TunerApi {
  constructor(
    private base: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async getJson<T>(
    path: string,
    query: Record<string, string | number | undefined>,
    signal?: AbortSignal,
  ): Promise<T> {
    const qs = new URLSearchParams();
    for (const [key, value] of Object.entries(query)) {
      if (value !== undefined) qs.set(key, String(value));
    }
    const text = qs.toString();
    const res = await this.fetchFn(`${this.base}${path}${text ? "?" + text : ""}`, { signal });
    if (!res.ok) throw new ApiError(await errorMessage(res), res.status);
    return (await res.json()) as T;
  }

  getSummary(kind: string): Promise<SummaryCurve> {
    return this.getJson("/api/summary", { kind });
  }

  getTheoretical(
    query: { kind: string; family?: string; sigma?: number; phi?: number; nu?: number; theta?: number },
    signal?: AbortSignal,
  ): Promise<TheoreticalCurve> {
    return this.getJson("/api/theoretical", query, signal);
  }

  getLambdaPreview(
    bandwidth: number | undefined,
    adjust: number,
    signal?: AbortSignal,
  ): Promise<LambdaPreview> {
    return this.getJson("/api/lambda-preview", { bandwidth, adjust }, signal);
  }

  getParams(): Promise<Partial<Params>> {
    return this.getJson("/api/params", {});
  }

  async saveParams(params: Params): Promise<Params> {
    const res = await this.fetchFn(`${this.base}/api/params`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(params),
    });
    if (!res.ok) throw new ApiError(await errorMessage(res), res.status);
    return (await res.json()) as Params;
  }
}

/**
 * Wrap an async task so only the newest call counts: starting a new one
 * aborts the previous request, and a superseded result resolves to null
 * instead of clobbering fresher state.
 */
export function latestWins<A extends unknown[], R>(
  task: (signal: AbortSignal, ...args: A) => Promise<R>,
): (...args: A) => Promise<R | null> {
  let current: AbortController | null = null;
  return async (...args: A) => {
    current?.abort();
    const controller = new AbortController();
    current = controller;
    try {
      const result = await task(controller.signal, ...args);
      return controller === current ? result : null;
    } catch (exc) {
      if (controller.signal.aborted) return null;
      throw exc;
    }
  };
}
