/**
 * Topic curation: top words and dates per topic with a keep/discard
 * toggle that round-trips through the service (the export pipeline
 * filters on the persisted status, never on client state).
 */

import type { ApiClient, TopicInfo } from "./api.js";

export class CurationController {
  topics: TopicInfo[] = [];

  constructor(
    private api: ApiClient,
    public emotion: string,
  ) {}

  async load(): Promise<TopicInfo[]> {
    this.topics = await this.api.topics(this.emotion);
    return this.topics;
  }

  async setStatus(topic: number, status: "kept" | "discarded"): Promise<void> {
    await this.api.setTopicStatus(this.emotion, topic, status);
    const row = this.topics.find((t) => t.topic === topic);
    if (row) row.status = status;
  }

  async toggle(topic: number): Promise<"kept" | "discarded"> {
    const row = this.topics.find((t) => t.topic === topic);
    if (!row) throw new Error(`unknown topic ${topic}`);
    const next = row.status === "kept" ? "discarded" : "kept";
    await this.setStatus(topic, next);
    return next;
  }
}
