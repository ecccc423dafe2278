/**
 * Typed client for the annotation service HTTP+JSON contract.
 *
 * The UI never computes labels or tokens itself: posts arrive with the
 * server's token list, and every response's schema_version is checked
 * before use. A version mismatch flips the app into read-only mode.
 */

export const EXPECTED_SCHEMA = "affectline-v1";

export interface ServedToken {
  form: string;
  surface: string;
}

export interface ServedPost {
  id: string;
  text: string;
  date: string;
  tokens: ServedToken[];
}

export type Task = "relevance" | "emotion" | "trigger";

export interface BatchResponse {
  schema_version: string;
  batch_id: string | null;
  task: Task;
  expires_at: number | null;
  posts: ServedPost[];
}

export interface RoundInfo {
  index: number;
  status: string;
  harvested: number;
  sample_size: number;
  labeled: number;
  test_f1: number | null;
}

export interface TopicInfo {
  topic: number;
  top_words: string[];
  top_dates: string[];
  mention_count: number;
  status: "kept" | "discarded";
}

export interface LabelItem {
  post_id: string;
  payload: unknown;
}

export class SchemaVersionError extends Error {
  constructor(public got: string) {
    super(`server schema ${got} != ${EXPECTED_SCHEMA}; UI is read-only`);
  }
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private annotator: string,
    private token: string | null = null,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private headers(): Record<string, string> {
    const out: Record<string, string> = {
      "content-type": "application/json",
      "x-annotator": this.annotator,
    };
    if (this.token) out["x-annotator-token"] = this.token;
    return out;
  }

  private async request<T extends { schema_version: string }>(
    path: string,
    init?: RequestInit,
  ): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      ...init,
      headers: { ...this.headers(), ...(init?.headers ?? {}) },
    });
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = (await resp.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, detail);
    }
    const body = (await resp.json()) as T;
    if (body.schema_version !== EXPECTED_SCHEMA) {
      throw new SchemaVersionError(body.schema_version);
    }
    return body;
  }

  nextBatch(task: Task, size: number): Promise<BatchResponse> {
    return this.request<BatchResponse>(
      `/batches/next?task=${task}&size=${size}`,
    );
  }

  async submitLabels(batchId: string, labels: LabelItem[]): Promise<number> {
    const body = await this.request<{ schema_version: string; appended: number }>(
      `/batches/${batchId}/labels`,
      { method: "POST", body: JSON.stringify({ labels }) },
    );
    return body.appended;
  }

  async rounds(): Promise<RoundInfo[]> {
    const body = await this.request<{ schema_version: string; rounds: RoundInfo[] }>(
      "/rounds",
    );
    return body.rounds;
  }

  advanceRound(): Promise<{ schema_version: string; round: number; status: string }> {
    return this.request("/rounds/advance", { method: "POST" });
  }

  async topics(emotion: string): Promise<TopicInfo[]> {
    const body = await this.request<{ schema_version: string; topics: TopicInfo[] }>(
      `/topics?emotion=${encodeURIComponent(emotion)}`,
    );
    return body.topics;
  }

  async setTopicStatus(
    emotion: string,
    topic: number,
    status: "kept" | "discarded",
  ): Promise<void> {
    await this.request(`/topics/${encodeURIComponent(emotion)}/${topic}/status`, {
      method: "POST",
      body: JSON.stringify({ status }),
    });
  }
}
