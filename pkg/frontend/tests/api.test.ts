import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, type FetchLike } from "../src/api.js";

function fetchRecorder(
  responder: (url: string, init?: RequestInit) => Response,
): { urls: string[]; fetchImpl: FetchLike } {
  const urls: string[] = [];
  return {
    urls,
    fetchImpl: async (url, init) => {
      urls.push(url);
      return responder(url, init);
    },
  };
}

const ok = (body: unknown) =>
  new Response(JSON.stringify(body), {
    status: 200,
    headers: { "content-type": "application/json" },
  });

describe("ApiClient", () => {
  it("prefixes every request with the configured origin", async () => {
    const { urls, fetchImpl } = fetchRecorder(() => ok({ entries: [] }));
    const api = new ApiClient("http://127.0.0.1:9999", fetchImpl);
    await api.health().catch(() => {});
    await api.vocab("e1").catch(() => {});
    await api.distribution([], 5).catch(() => {});
    expect(urls).toEqual([
      "http://127.0.0.1:9999/health",
      "http://127.0.0.1:9999/vocab?filter=e1",
      "http://127.0.0.1:9999/distribution",
    ]);
  });

  it("serializes generate requests as the service expects", async () => {
    let captured: unknown = null;
    const { fetchImpl } = fetchRecorder((_url, init) => {
      captured = JSON.parse(String(init?.body));
      return ok({ seed: 1, n_samples: 2, samples: [] });
    });
    const api = new ApiClient("http://x", fetchImpl);
    await api.generate({
      events: [{ code: "E11", age_years: 42 }],
      params: { seed: 5, max_age_years: 85 },
      n_samples: 2,
    });
    expect(captured).toEqual({
      events: [{ code: "E11", age_years: 42 }],
      params: { seed: 5, max_age_years: 85 },
      n_samples: 2,
    });
  });

  it("surfaces the server's error message with the status", async () => {
    const { fetchImpl } = fetchRecorder(
      () => new Response(JSON.stringify({ error: "unknown code 'ZZZ'" }), { status: 422 }),
    );
    const api = new ApiClient("http://x", fetchImpl);
    await expect(api.vocab()).rejects.toThrowError(/ZZZ/);
    try {
      await api.vocab();
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).status).toBe(422);
    }
  });

  it("maps network failures to a reachable message", async () => {
    const api = new ApiClient("http://x", async () => {
      throw new TypeError("fetch failed");
    });
    await expect(api.health()).rejects.toThrowError(/unreachable/);
  });
});
