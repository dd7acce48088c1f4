/**
 * Typed client for the local trajectory service.
 *
 * Every request goes to the single configured origin; this class is the
 * app's only egress point, which is what keeps the no-third-party-traffic
 * invariant checkable.
 */

import type {
  DistributionResponse,
  GenerateRequest,
  GenerateResponse,
  HealthResponse,
  RiskRequest,
  RiskResponse,
  VocabResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly origin: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.origin}${path}`, init);
    } catch (err) {
      throw new ApiError(`service unreachable: ${String(err)}`, 0);
    }
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      // non-JSON error body; fall through with the status text
    }
    if (!response.ok) {
      const message =
        body && typeof body === "object" && "error" in body
          ? String((body as { error: unknown }).error)
          : `request failed with status ${response.status}`;
      throw new ApiError(message, response.status);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  health(): Promise<HealthResponse> {
    return this.request<HealthResponse>("/health");
  }

  vocab(filter?: string): Promise<VocabResponse> {
    const query = filter ? `?filter=${encodeURIComponent(filter)}` : "";
    return this.request<VocabResponse>(`/vocab${query}`);
  }

  generate(req: GenerateRequest): Promise<GenerateResponse> {
    return this.post<GenerateResponse>("/generate", req);
  }

  risk(req: RiskRequest): Promise<RiskResponse> {
    return this.post<RiskResponse>("/risk", req);
  }

  distribution(events: { code: string; age_years: number }[], topK: number): Promise<DistributionResponse> {
    return this.post<DistributionResponse>("/distribution", {
      events,
      top_k: topK,
    });
  }
}
