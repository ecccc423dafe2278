import { ApiClient, ServedPost } from "../src/api";
import type { StorageLike } from "../src/session";

export class FakeStorage implements StorageLike {
  private map = new Map<string, string>();

  getItem(key: string): string | null {
    return this.map.get(key) ?? null;
  }

  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }

  removeItem(key: string): void {
    this.map.delete(key);
  }
}

export interface Recorded {
  url: string;
  method: string;
  body: unknown;
}

/** Canned-response fake server; records every request it sees. */
export class FakeServer {
  requests: Recorded[] = [];
  schema = "affectline-v1";
  posts: ServedPost[] = [];
  topics: { topic: number; top_words: string[]; top_dates: string[]; mention_count: number; status: string }[] = [];

  client(annotator = "tester"): ApiClient {
    return new ApiClient("http://fake", annotator, null, (url, init) =>
      Promise.resolve(this.handle(url, init)),
    );
  }

  private respond(payload: Record<string, unknown>, status = 200): Response {
    return new Response(JSON.stringify({ schema_version: this.schema, ...payload }), {
      status,
      headers: { "content-type": "application/json" },
    });
  }

  private handle(url: string, init?: RequestInit): Response {
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(init.body as string) : null;
    this.requests.push({ url, method, body });
    if (url.includes("/batches/next")) {
      return this.respond({
        batch_id: this.posts.length ? "batch-1" : null,
        task: new URL(url).searchParams.get("task"),
        expires_at: this.posts.length ? 9e9 : null,
        posts: this.posts,
      });
    }
    if (url.includes("/labels")) {
      return this.respond({ appended: (body as { labels: unknown[] }).labels.length });
    }
    if (url.includes("/rounds/advance")) {
      return this.respond({ round: 0, status: "closed", test_f1: 0.9 });
    }
    if (url.includes("/rounds")) {
      return this.respond({ rounds: [] });
    }
    if (url.includes("/status")) {
      return this.respond({});
    }
    if (url.includes("/topics")) {
      return this.respond({ emotion: "anger", topics: this.topics });
    }
    return this.respond({ detail: "not found" }, 404);
  }
}

export function servedPosts(n: number): ServedPost[] {
  return Array.from({ length: n }, (_, i) => {
    const text = `post number ${i} quite angry about the endless lockdown today`;
    return {
      id: `p${i}`,
      text,
      date: "2020-03-01",
      tokens: text.split(" ").map((w) => ({ form: w.toLowerCase(), surface: w })),
    };
  });
}
