import type { SweepResponse } from './types';

export const LAMBDA_MIN = 0;
export const LAMBDA_MAX = 0.1;
export const RECOMMENDED_LAMBDA_MAX = 0.03;
export const DEFAULT_SWEEP_LAMBDAS = [0, 0.03, 0.06, 0.09];

export type ViewMode = 'side-by-side' | 'sweep';

export interface StudioState {
  caseId: string | null;
  metabolite: string;
  n: number;
  lambda: number;
  viewMode: ViewMode;
}

export function initialState(): StudioState {
  return {
    caseId: null,
    metabolite: 'Gly',
    n: 16,
    lambda: 0,
    viewMode: 'side-by-side',
  };
}

export function clampLambda(value: number): number {
  if (Number.isNaN(value)) return LAMBDA_MIN;
  return Math.min(LAMBDA_MAX, Math.max(LAMBDA_MIN, value));
}

/** Unique cache key for one sweep request (the lambda grid is part of it). */
export function sweepKey(state: StudioState, lambdas: number[]): string {
  return JSON.stringify([state.caseId, state.metabolite, state.n, lambdas]);
}

/** Bounded response cache keyed by (case, metabolite, n, lambda grid). */
export class ResponseCache {
  private entries = new Map<string, SweepResponse>();

  constructor(private readonly capacity = 64) {
    if (capacity < 1) throw new Error('cache capacity must be >= 1');
  }

  get(key: string): SweepResponse | undefined {
    const hit = this.entries.get(key);
    if (hit !== undefined) {
      // refresh LRU position
      this.entries.delete(key);
      this.entries.set(key, hit);
    }
    return hit;
  }

  put(key: string, value: SweepResponse): void {
    this.entries.delete(key);
    this.entries.set(key, value);
    while (this.entries.size > this.capacity) {
      const oldest = this.entries.keys().next().value as string;
      this.entries.delete(oldest);
    }
  }

  get size(): number {
    return this.entries.size;
  }
}

/**
 * Monotonic sequence numbers used to reconcile concurrent fetches: a
 * response is rendered only if no newer request has been issued since.
 */
export class SequenceGuard {
  private next = 0;
  private latest = -1;

  issue(): number {
    this.latest = this.next;
    return this.next++;
  }

  isCurrent(seq: number): boolean {
    return seq === this.latest;
  }
}
