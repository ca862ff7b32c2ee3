/** Session-side state that is worth testing without a DOM. */

import type { FitResult, Preview, QuantityName } from "./types.js";

/**
 * Latest-wins gate for preview requests: starting a new request aborts the
 * previous in-flight one, and stale responses (token mismatch) are dropped.
 */
export class PreviewGate {
  private seq = 0;
  private controller: AbortController | null = null;

  begin(): { token: number; signal: AbortSignal } {
    if (this.controller) this.controller.abort();
    this.controller = new AbortController();
    this.seq += 1;
    return { token: this.seq, signal: this.controller.signal };
  }

  /** True iff `token` belongs to the most recently started request. */
  accepts(token: number): boolean {
    return token === this.seq;
  }
}

export interface SessionState {
  id: string | null;
  fits: Partial<Record<QuantityName, FitResult>>;
  preview: Preview | null;
  pinned: Preview | null;
}

export function emptyState(): SessionState {
  return { id: null, fits: {}, preview: null, pinned: null };
}

export function isComplete(state: SessionState): boolean {
  return (["S1_t0", "delta11", "delta21", "delta22"] as QuantityName[]).every(
    (name) => state.fits[name] !== undefined,
  );
}

/** Pin the current preview as the ghost overlay for revise-and-compare. */
export function pinCurrent(state: SessionState): SessionState {
  if (!state.preview) return state;
  return { ...state, pinned: state.preview };
}

export function clearPin(state: SessionState): SessionState {
  return { ...state, pinned: null };
}

/** Violation counts sorted by dominance for the constraint readout. */
export function dominantViolations(
  violations: Record<string, number>,
  limit = 5,
): Array<{ name: string; count: number }> {
  return Object.entries(violations)
    .filter(([, count]) => count > 0)
    .map(([name, count]) => ({ name, count }))
    .sort((a, b) => b.count - a.count || a.name.localeCompare(b.name))
    .slice(0, limit);
}
