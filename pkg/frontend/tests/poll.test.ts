import { describe, expect, it } from "vitest";
import { AnalysisStatus, FragilityClient } from "../src/api.js";
import { nextDelay, pollAnalysis } from "../src/poll.js";

function clientWithStatuses(statuses: AnalysisStatus["status"][]) {
  let i = 0;
  const impl = async () =>
    new Response(
      JSON.stringify({
        analysis_id: "a",
        status: statuses[Math.min(i++, statuses.length - 1)],
        partial: [],
        error: null,
      }),
      { status: 200 },
    );
  return new FragilityClient("", impl);
}

describe("polling", () => {
  it("backs off geometrically up to the cap", () => {
    let delay = 300;
    const seen = [delay];
    for (let i = 0; i < 6; i++) {
      delay = nextDelay(delay, 4000);
      seen.push(delay);
    }
    expect(seen).toEqual([300, 480, 768, 1229, 1966, 3146, 4000]);
  });

  it("polls until a terminal status and reports each update", async () => {
    const client = clientWithStatuses(["queued", "running", "running", "done"]);
    const sleeps: number[] = [];
    const updates: string[] = [];
    const status = await pollAnalysis(client, "a", {
      baseMs: 10,
      maxMs: 50,
      sleep: async (ms) => {
        sleeps.push(ms);
      },
      onUpdate: (s) => updates.push(s.status),
    });
    expect(status.status).toBe("done");
    expect(updates).toEqual(["queued", "running", "running", "done"]);
    expect(sleeps).toEqual([10, 16, 26]);
  });

  it("stops early when the signal aborts", async () => {
    const client = clientWithStatuses(["running", "running"]);
    const signal = { aborted: true };
    const status = await pollAnalysis(client, "a", {
      baseMs: 1,
      sleep: async () => {},
      signal,
    });
    expect(status.status).toBe("running");
  });
});
