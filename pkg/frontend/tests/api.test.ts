import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { FragilityClient, ServiceError } from "../src/api.js";
import { parseConfig } from "../src/config.js";

const selection = parseConfig(
  readFileSync(new URL("./fixtures/selection.json", import.meta.url), "utf-8"),
);

function fakeFetch(handler: (url: string, init?: RequestInit) => { status: number; body: unknown }) {
  const calls: { url: string; init?: RequestInit }[] = [];
  const impl = async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    const { status, body } = handler(url, init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { impl, calls };
}

describe("service client", () => {
  it("posts configs for validation", async () => {
    const { impl, calls } = fakeFetch(() => ({
      status: 200,
      body: { valid: true, scheme_dims: { total_dim: 258, blocks: [] } },
    }));
    const client = new FragilityClient("http://svc", impl);
    const result = await client.validateConfig(selection);
    expect(result.valid).toBe(true);
    expect(calls[0].url).toBe("http://svc/configs/validate");
    const sent = JSON.parse(calls[0].init?.body as string);
    expect(sent.config.cond_nodes).toEqual(["S"]);
  });

  it("surfaces field-level errors as ServiceError", async () => {
    const { impl } = fakeFetch(() => ({
      status: 400,
      body: { error: { field: "table_id", message: "unknown table" } },
    }));
    const client = new FragilityClient("", impl);
    await expect(
      client.submitAnalysis({
        config: selection,
        table_id: "nope",
        metric: "DP",
        deltas: [0],
      }),
    ).rejects.toThrow(ServiceError);
  });

  it("walks the analysis lifecycle endpoints", async () => {
    const { impl, calls } = fakeFetch((url, init) => {
      if (url.endsWith("/analyses") && init?.method === "POST") {
        return { status: 202, body: { analysis_id: "abc" } };
      }
      if (url.endsWith("/analyses/abc") && init?.method === "GET") {
        return {
          status: 200,
          body: { analysis_id: "abc", status: "done", partial: [], error: null },
        };
      }
      return { status: 404, body: { error: "unknown" } };
    });
    const client = new FragilityClient("", impl);
    const { analysis_id } = await client.submitAnalysis({
      config: selection,
      table_id: "t",
      metric: "DP",
      deltas: [0],
    });
    const status = await client.analysisStatus(analysis_id);
    expect(status.status).toBe("done");
    expect(calls.map((c) => c.init?.method ?? "GET")).toEqual(["POST", "GET"]);
  });
});
