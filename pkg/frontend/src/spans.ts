/**
 * Token-level span selection by click-drag.
 *
 * One span per (post, emotion): starting a new drag replaces the old
 * span, so overlap is impossible by construction. Spans are half-open
 * token index ranges, exactly what the server stores.
 */

export interface Span {
  start: number;
  end: number; // half-open
}

export class SpanSelection {
  private anchor: number | null = null;
  private focus: number | null = null;
  private spans = new Map<string, Span>();

  constructor(private tokenCount: number) {}

  beginDrag(index: number): void {
    if (index < 0 || index >= this.tokenCount) return;
    this.anchor = index;
    this.focus = index;
  }

  dragTo(index: number): void {
    if (this.anchor === null) return;
    if (index < 0 || index >= this.tokenCount) return;
    this.focus = index;
  }

  /** Finish the drag, replacing any previous span for the emotion. */
  endDrag(emotion: string): Span | null {
    if (this.anchor === null || this.focus === null) return null;
    const lo = Math.min(this.anchor, this.focus);
    const hi = Math.max(this.anchor, this.focus);
    const span = { start: lo, end: hi + 1 };
    this.spans.set(emotion, span);
    this.anchor = null;
    this.focus = null;
    return span;
  }

  cancelDrag(): void {
    this.anchor = null;
    this.focus = null;
  }

  get dragging(): boolean {
    return this.anchor !== null;
  }

  /** Live half-open preview of the drag in progress. */
  preview(): Span | null {
    if (this.anchor === null || this.focus === null) return null;
    const lo = Math.min(this.anchor, this.focus);
    const hi = Math.max(this.anchor, this.focus);
    return { start: lo, end: hi + 1 };
  }

  spanFor(emotion: string): Span | undefined {
    return this.spans.get(emotion);
  }

  clear(emotion: string): void {
    this.spans.delete(emotion);
  }

  /** Label-log payload rows: [emotion, start, end], emotion-sorted. */
  payload(): [string, number, number][] {
    return [...this.spans.entries()]
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([emotion, s]) => [emotion, s.start, s.end]);
  }
}
