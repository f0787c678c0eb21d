/** Polling with exponential backoff for analysis jobs. */

import { AnalysisStatus, FragilityClient } from "./api.js";

export interface PollOptions {
  baseMs?: number;
  maxMs?: number;
  onUpdate?: (status: AnalysisStatus) => void;
  signal?: { aborted: boolean };
  sleep?: (ms: number) => Promise<void>;
}

const TERMINAL = new Set(["done", "failed", "cancelled"]);

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export function nextDelay(current: number, maxMs: number): number {
  return Math.min(Math.round(current * 1.6), maxMs);
}

export async function pollAnalysis(
  client: FragilityClient,
  analysisId: string,
  options: PollOptions = {},
): Promise<AnalysisStatus> {
  const baseMs = options.baseMs ?? 300;
  const maxMs = options.maxMs ?? 4000;
  const sleep = options.sleep ?? defaultSleep;
  let delay = baseMs;
  for (;;) {
    const status = await client.analysisStatus(analysisId);
    options.onUpdate?.(status);
    if (TERMINAL.has(status.status)) {
      return status;
    }
    if (options.signal?.aborted) {
      return status;
    }
    await sleep(delay);
    delay = nextDelay(delay, maxMs);
  }
}
