/**
 * Batch session state: the leased batch, locally staged labels, and an
 * undo stack. Unsubmitted work is mirrored into storage on every change
 * so a page reload restores it; submitted labels are dropped from
 * storage and can no longer be edited.
 */

import type { ServedPost, Task } from "./api.js";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

interface PersistedSession {
  batchId: string;
  cursor: number;
  labels: [string, unknown][];
}

export class BatchSession {
  readonly task: Task;
  readonly batchId: string;
  readonly posts: ServedPost[];
  cursor = 0;
  private labels = new Map<string, unknown>();
  private undoStack: string[] = [];
  private submitted = false;

  constructor(
    task: Task,
    batchId: string,
    posts: ServedPost[],
    private storage: StorageLike,
  ) {
    this.task = task;
    this.batchId = batchId;
    this.posts = posts;
    this.restore();
  }

  private key(): string {
    return `affectline:pending:${this.task}`;
  }

  private restore(): void {
    const raw = this.storage.getItem(this.key());
    if (!raw) return;
    try {
      const saved = JSON.parse(raw) as PersistedSession;
      if (saved.batchId !== this.batchId) return; // a different batch's leftovers
      this.cursor = saved.cursor;
      this.labels = new Map(saved.labels);
    } catch {
      this.storage.removeItem(this.key());
    }
  }

  private persist(): void {
    const body: PersistedSession = {
      batchId: this.batchId,
      cursor: this.cursor,
      labels: [...this.labels.entries()],
    };
    this.storage.setItem(this.key(), JSON.stringify(body));
  }

  get isSubmitted(): boolean {
    return this.submitted;
  }

  current(): ServedPost | undefined {
    return this.posts[this.cursor];
  }

  get done(): boolean {
    return this.cursor >= this.posts.length;
  }

  labelOf(postId: string): unknown {
    return this.labels.get(postId);
  }

  labeledCount(): number {
    return this.labels.size;
  }

  /** Stage a label for the current post and advance. */
  label(payload: unknown): void {
    this.assertEditable();
    const post = this.current();
    if (!post) return;
    this.labels.set(post.id, payload);
    this.undoStack.push(post.id);
    this.cursor += 1;
    this.persist();
  }

  /** Advance without labeling; the post stays re-issuable server-side. */
  skip(): void {
    this.assertEditable();
    if (!this.done) {
      this.cursor += 1;
      this.persist();
    }
  }

  /** Step back to the most recently labeled post, unstaging its label. */
  undo(): void {
    this.assertEditable();
    const postId = this.undoStack.pop();
    if (postId === undefined) return;
    this.labels.delete(postId);
    const index = this.posts.findIndex((p) => p.id === postId);
    if (index >= 0) this.cursor = index;
    this.persist();
  }

  /** Labels staged so far, in post order; skipped posts are absent. */
  payload(): { post_id: string; payload: unknown }[] {
    return this.posts
      .filter((p) => this.labels.has(p.id))
      .map((p) => ({ post_id: p.id, payload: this.labels.get(p.id) }));
  }

  /** Mark the batch submitted: storage cleared, edits locked. */
  markSubmitted(): void {
    this.submitted = true;
    this.storage.removeItem(this.key());
  }

  private assertEditable(): void {
    if (this.submitted) {
      throw new Error("batch already submitted; labels are immutable");
    }
  }
}
