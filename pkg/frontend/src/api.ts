/** Thin client for the pipeline service; fetch is injectable for tests. */

import type {
  PipelineConfigJson,
  RunStatus,
  SessionTranscript,
  TradeoffPoint,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(message: string, public readonly status: number, public readonly detail?: unknown) {
    super(message);
    this.name = "ApiError";
  }
}

export interface TradeoffRequest {
  schema: PipelineConfigJson["schema"];
  query: unknown;
  epsilons: number[];
  trials?: number;
  seed?: number;
  csv_b64?: string;
  input_b64?: string;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let detail: unknown;
      try {
        detail = (await response.json()).detail;
      } catch {
        detail = undefined;
      }
      throw new ApiError(`${method} ${path} failed (${response.status})`, response.status, detail);
    }
    return (await response.json()) as T;
  }

  submitRun(config: PipelineConfigJson, inputB64: string): Promise<{ run_id: string }> {
    return this.request("POST", "/runs", { config, input_b64: inputB64 });
  }

  getRun(runId: string): Promise<RunStatus> {
    return this.request("GET", `/runs/${runId}`);
  }

  tradeoff(request: TradeoffRequest): Promise<{ points: TradeoffPoint[] }> {
    return this.request("POST", "/tradeoff", request);
  }

  attestSession(tamper?: string): Promise<SessionTranscript> {
    return this.request("POST", "/attest/session", tamper ? { tamper } : {});
  }

  healthz(): Promise<{ status: string }> {
    return this.request("GET", "/healthz");
  }
}

/** Poll a run until it settles; reports every observed status via onUpdate. */
export async function pollRun(
  client: ApiClient,
  runId: string,
  options: { intervalMs?: number; maxAttempts?: number; onUpdate?: (s: RunStatus) => void } = {},
): Promise<RunStatus> {
  const { intervalMs = 250, maxAttempts = 240, onUpdate } = options;
  for (let attempt = 0; attempt < maxAttempts; attempt++) {
    const status = await client.getRun(runId);
    onUpdate?.(status);
    if (status.status === "done" || status.status === "failed") {
      return status;
    }
    await new Promise((resolve) => setTimeout(resolve, intervalMs));
  }
  throw new ApiError(`run ${runId} did not settle`, 408);
}
