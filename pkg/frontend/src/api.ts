/** Typed client for the local analysis service. */

import { BiasConfig } from "./config.js";

export interface SchemeDims {
  total_dim: number;
  blocks: { nodes: string[]; dim: number; offset: number }[];
}

export interface ValidateResponse {
  valid: boolean;
  errors?: string[];
  scheme_dims?: SchemeDims;
  projected_edgelist?: string;
}

export interface TableResponse {
  table_id: string;
  total: number;
  frequencies: Record<string, number>;
  empirical: Record<string, number | null>;
}

export interface BoundsRow {
  delta: number | number[];
  lower: number | null;
  upper: number | null;
  incumbent_lo: number | null;
  incumbent_hi: number | null;
  gap: number | null;
  nodes: number;
  status: string;
}

export interface ResultDocument {
  schema_version: number;
  engine_version: string;
  config: BiasConfig;
  second_config: BiasConfig | null;
  config_hash: string;
  table_hash: string;
  metric: string;
  deltas: (number | number[])[];
  results: BoundsRow[];
  options: Record<string, unknown>;
  seed: number;
  timestamps: unknown;
  document_hash?: string;
}

export interface AnalysisStatus {
  analysis_id: string;
  status: "queued" | "running" | "done" | "failed" | "cancelled";
  partial: BoundsRow[];
  error: string | null;
  document?: ResultDocument;
}

export interface AnalysisRequest {
  config: BiasConfig;
  table_id: string;
  metric: string;
  deltas: number[];
  second_config?: BiasConfig;
  second_deltas?: number[];
  policy?: string;
  group?: number;
  sense?: string;
  seed?: number;
  options?: Record<string, unknown>;
  idempotency_key?: string;
}

export interface MetricInfo {
  name: string;
  requires_policy: boolean;
  pair: boolean;
  observational: boolean;
  takes_group: boolean;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class FragilityClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch.bind(globalThis),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const text = await response.text();
    const payload = text ? JSON.parse(text) : null;
    if (!response.ok) {
      const message =
        payload && payload.error
          ? typeof payload.error === "string"
            ? payload.error
            : JSON.stringify(payload.error)
          : response.statusText;
      throw new ServiceError(response.status, message);
    }
    return payload as T;
  }

  validateConfig(config: BiasConfig): Promise<ValidateResponse> {
    return this.request("POST", "/configs/validate", { config });
  }

  uploadTable(csv: string): Promise<TableResponse> {
    return this.request("POST", "/tables", { csv });
  }

  metrics(): Promise<{ metrics: MetricInfo[] }> {
    return this.request("GET", "/metrics");
  }

  submitAnalysis(request: AnalysisRequest): Promise<{ analysis_id: string }> {
    return this.request("POST", "/analyses", request);
  }

  analysisStatus(id: string): Promise<AnalysisStatus> {
    return this.request("GET", `/analyses/${id}`);
  }

  cancelAnalysis(id: string): Promise<AnalysisStatus> {
    return this.request("DELETE", `/analyses/${id}`);
  }
}
