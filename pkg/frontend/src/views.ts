/**
 * View controllers: pure state machines the DOM layer renders from.
 * Each wraps a BatchSession and knows how to turn interaction events
 * into staged labels and, on completion, one batch submission.
 */

import type { ApiClient, ServedPost } from "./api.js";
import { BatchSession, StorageLike } from "./session.js";
import { SpanSelection } from "./spans.js";

export const EMOTIONS = [
  "anger",
  "disgust",
  "fear",
  "happiness",
  "sadness",
  "surprise",
] as const;

export type Emotion = (typeof EMOTIONS)[number];

export const TRIAGE_BATCH_SIZE = 50;
export const SPAN_BATCH_SIZE = 20;

/** Keyboard-driven yes/no/skip relevance pass over one leased batch. */
export class TriageController {
  constructor(
    public session: BatchSession,
    private api: ApiClient,
  ) {}

  /** y/n stage a label, s skips, u undoes; returns true when consumed. */
  async handleKey(key: string): Promise<boolean> {
    switch (key) {
      case "y":
        this.session.label(true);
        break;
      case "n":
        this.session.label(false);
        break;
      case "s":
        this.session.skip();
        break;
      case "u":
        this.session.undo();
        return true;
      default:
        return false;
    }
    await this.submitIfDone();
    return true;
  }

  /** One POST with the whole batch's labels once the pass completes. */
  async submitIfDone(): Promise<number | null> {
    if (!this.session.done || this.session.isSubmitted) return null;
    if (this.session.labeledCount() === 0) {
      this.session.markSubmitted(); // nothing to send; batch lease lapses
      return 0;
    }
    const appended = await this.api.submitLabels(
      this.session.batchId,
      this.session.payload(),
    );
    this.session.markSubmitted();
    return appended;
  }
}

/** Six checkboxes plus a neutral shortcut per post. */
export class EmotionController {
  private selection = new Set<Emotion>();

  constructor(
    public session: BatchSession,
    private api: ApiClient,
  ) {}

  toggle(emotion: Emotion): void {
    if (this.selection.has(emotion)) this.selection.delete(emotion);
    else this.selection.add(emotion);
  }

  selected(): Emotion[] {
    return EMOTIONS.filter((e) => this.selection.has(e));
  }

  /** Submit the current post's emotion set (sorted ids). */
  async confirm(): Promise<void> {
    this.session.label(this.selected());
    this.selection.clear();
    await this.submitIfDone();
  }

  /** Neutral shortcut: the empty set. */
  async neutral(): Promise<void> {
    this.selection.clear();
    await this.confirm();
  }

  async submitIfDone(): Promise<number | null> {
    if (!this.session.done || this.session.isSubmitted) return null;
    const appended = await this.api.submitLabels(
      this.session.batchId,
      this.session.payload(),
    );
    this.session.markSubmitted();
    return appended;
  }
}

/** Click-drag trigger spans, one per (post, emotion). */
export class TriggerController {
  selection: SpanSelection;
  activeEmotion: Emotion = "anger";

  constructor(
    public session: BatchSession,
    private api: ApiClient,
  ) {
    this.selection = this.freshSelection();
  }

  private freshSelection(): SpanSelection {
    const post = this.session.current();
    return new SpanSelection(post ? post.tokens.length : 0);
  }

  setEmotion(emotion: Emotion): void {
    this.activeEmotion = emotion;
  }

  tokenDown(index: number): void {
    this.selection.beginDrag(index);
  }

  tokenEnter(index: number): void {
    this.selection.dragTo(index);
  }

  /** Mouse-up over token `index` commits the drag for the active emotion. */
  tokenUp(index: number): [string, number, number] | null {
    this.selection.dragTo(index);
    const span = this.selection.endDrag(this.activeEmotion);
    return span ? [this.activeEmotion, span.start, span.end] : null;
  }

  /** Confirm this post's spans and move on. */
  async confirm(): Promise<void> {
    this.session.label(this.selection.payload());
    this.selection = this.freshSelection();
    await this.submitIfDone();
  }

  async submitIfDone(): Promise<number | null> {
    if (!this.session.done || this.session.isSubmitted) return null;
    const appended = await this.api.submitLabels(
      this.session.batchId,
      this.session.payload(),
    );
    this.session.markSubmitted();
    return appended;
  }
}

/** Lease the next batch of a task into a fresh session. */
export async function leaseBatch(
  api: ApiClient,
  task: "relevance" | "emotion" | "trigger",
  storage: StorageLike,
  size?: number,
): Promise<BatchSession | null> {
  const wanted = size ?? (task === "relevance" ? TRIAGE_BATCH_SIZE : SPAN_BATCH_SIZE);
  const batch = await api.nextBatch(task, wanted);
  if (!batch.batch_id || batch.posts.length === 0) return null;
  return new BatchSession(task, batch.batch_id, batch.posts as ServedPost[], storage);
}
