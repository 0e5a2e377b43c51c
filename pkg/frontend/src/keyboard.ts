// Keyboard-first labeling: digit keys pick a class for the focused card
// and focus hops to the next unlabeled card, so a practiced annotator
// never leaves the home row.

/**
 * Digit-to-class mapping: "1".."9" select classes 0..8, "0" selects
 * class 9 when it exists. Returns null for anything else.
 */
export function classForKey(key: string, classCount: number): number | null {
  if (!/^[0-9]$/.test(key)) return null;
  const cls = key === "0" ? 9 : Number(key) - 1;
  return cls < classCount ? cls : null;
}

export class BatchDraft {
  private readonly labels = new Map<string, number>();
  private focusIdx: number;

  constructor(readonly order: readonly string[]) {
    this.focusIdx = 0;
  }

  get focused(): string | null {
    return this.order[this.focusIdx] ?? null;
  }

  labelOf(id: string): number | undefined {
    return this.labels.get(id);
  }

  get assignedCount(): number {
    return this.labels.size;
  }

  get complete(): boolean {
    return this.order.length > 0 && this.labels.size === this.order.length;
  }

  /** Label the focused card, then advance to the next unlabeled one. */
  assign(cls: number): void {
    const id = this.focused;
    if (id === null) return;
    this.labels.set(id, cls);
    const n = this.order.length;
    for (let step = 1; step <= n; step++) {
      const idx = (this.focusIdx + step) % n;
      const candidate = this.order[idx];
      if (candidate !== undefined && !this.labels.has(candidate)) {
        this.focusIdx = idx;
        return;
      }
    }
    // everything labeled: stay put so a correction lands where expected
  }

  clearFocused(): void {
    const id = this.focused;
    if (id !== null) this.labels.delete(id);
  }

  moveFocus(delta: number): void {
    const n = this.order.length;
    if (n === 0) return;
    this.focusIdx = ((this.focusIdx + delta) % n + n) % n;
  }

  focusOn(id: string): void {
    const idx = this.order.indexOf(id);
    if (idx >= 0) this.focusIdx = idx;
  }

  toLabels(): Record<string, number> {
    if (!this.complete && this.order.length > 0) {
      throw new Error(
        `${this.order.length - this.labels.size} cards still unlabeled`,
      );
    }
    const out: Record<string, number> = {};
    for (const id of this.order) {
      const cls = this.labels.get(id);
      if (cls !== undefined) out[id] = cls;
    }
    return out;
  }
}
