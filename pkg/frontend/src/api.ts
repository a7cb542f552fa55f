/**
 * Thin typed client over the gateway HTTP API.
 *
 * The fetch implementation is injectable so tests can drive the client with
 * recorded responses instead of a live server.
 */
import {
  Health,
  JobSnapshot,
  RerunResponse,
  SubmitResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function readDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return response.statusText || "request failed";
  }
}

export class GatewayClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    private readonly baseUrl: string = "",
    fetchImpl?: FetchLike,
  ) {
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      throw new ApiError(response.status, await readDetail(response));
    }
    return response.json();
  }

  private async post(path: string, body: unknown): Promise<unknown> {
    return this.request(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async health(): Promise<Health> {
    return Health.parse(await this.request("/api/v1/health"));
  }

  async submitCase(
    reportText: string,
    impression = "",
    configOverrides?: Record<string, number>,
  ): Promise<string> {
    const body: Record<string, unknown> = {
      report_text: reportText,
      impression,
    };
    if (configOverrides) body.config_overrides = configOverrides;
    const parsed = SubmitResponse.parse(await this.post("/api/v1/cases", body));
    return parsed.job_id;
  }

  async getJob(jobId: string): Promise<JobSnapshot> {
    return JobSnapshot.parse(
      await this.request(`/api/v1/jobs/${encodeURIComponent(jobId)}`),
    );
  }

  async rerunWithKeywords(
    jobId: string,
    keywords: string[],
  ): Promise<RerunResponse> {
    return RerunResponse.parse(
      await this.post(`/api/v1/jobs/${encodeURIComponent(jobId)}/keywords`, {
        keywords,
      }),
    );
  }
}
