import { ServiceRequestError, ServiceUnavailableError } from './api';
import type { ApiClient } from './api';
import { SLIDER_DEBOUNCE_MS, debounce } from './debounce';
import type { Debounced } from './debounce';
import {
  DEFAULT_SWEEP_LAMBDAS,
  ResponseCache,
  SequenceGuard,
  clampLambda,
  initialState,
  sweepKey,
} from './state';
import type { StudioState, ViewMode } from './state';
import type { SweepResponse } from './types';

export interface RenderPayload {
  state: StudioState;
  /** Sweep response matching the current state, or null while loading. */
  response: SweepResponse | null;
  loading: boolean;
  error: string | null;
}

type Renderer = (payload: RenderPayload) => void;

type SweepApi = Pick<ApiClient, 'sweep'>;

/**
 * Owns the studio state and the request lifecycle.  Every state change
 * schedules one debounced sweep fetch; responses are dropped unless their
 * sequence number is still the latest AND their key matches the current
 * state, so a stale (case, lambda) image is never rendered.
 */
export class StudioController {
  private state: StudioState = initialState();
  private readonly cache = new ResponseCache();
  private readonly guard = new SequenceGuard();
  private readonly scheduleFetch: Debounced<[]>;
  private abort: AbortController | null = null;
  private lastError: string | null = null;

  constructor(
    private readonly api: SweepApi,
    private readonly render: Renderer,
    debounceMs: number = SLIDER_DEBOUNCE_MS,
    private readonly lambdas: number[] = DEFAULT_SWEEP_LAMBDAS,
  ) {
    this.scheduleFetch = debounce(() => void this.fetchSweep(), debounceMs);
  }

  getState(): StudioState {
    return { ...this.state };
  }

  /** The lambda grid requested from the sweep endpoint: the fixed strip
   * grid plus the current slider position. */
  requestLambdas(): number[] {
    const grid = [...this.lambdas];
    if (!grid.includes(this.state.lambda)) grid.push(this.state.lambda);
    return grid.sort((a, b) => a - b);
  }

  setCase(caseId: string): void {
    this.update({ caseId });
  }

  setMetabolite(metabolite: string): void {
    this.update({ metabolite });
  }

  setN(n: number): void {
    this.update({ n });
  }

  setLambda(value: number): void {
    this.update({ lambda: clampLambda(value) });
  }

  setViewMode(viewMode: ViewMode): void {
    // pure presentation change: no new request needed
    this.state = { ...this.state, viewMode };
    this.emit(this.currentResponse(), false);
  }

  private update(patch: Partial<StudioState>): void {
    this.state = { ...this.state, ...patch };
    if (this.state.caseId === null) {
      this.emit(null, false);
      return;
    }
    const cached = this.currentResponse();
    if (cached) {
      this.scheduleFetch.cancel();
      this.emit(cached, false);
      return;
    }
    this.emit(null, true);
    this.scheduleFetch();
  }

  private currentResponse(): SweepResponse | null {
    if (this.state.caseId === null) return null;
    return this.cache.get(sweepKey(this.state, this.requestLambdas())) ?? null;
  }

  private async fetchSweep(): Promise<void> {
    if (this.state.caseId === null) return;
    const seq = this.guard.issue();
    const lambdas = this.requestLambdas();
    const key = sweepKey(this.state, lambdas);
    this.abort?.abort();
    this.abort = new AbortController();
    this.lastError = null;
    let response: SweepResponse;
    try {
      response = await this.api.sweep(
        {
          case_id: this.state.caseId,
          n: this.state.n,
          metabolite: this.state.metabolite,
          lambdas,
          include_baseline: true,
          include_ground_truth: true,
        },
        this.abort.signal,
      );
    } catch (err) {
      if (err instanceof DOMException && err.name === 'AbortError') return;
      if (!this.guard.isCurrent(seq)) return;
      if (err instanceof ServiceUnavailableError) {
        this.lastError = 'Inference service unreachable.';
      } else if (err instanceof ServiceRequestError) {
        this.lastError = `${err.code}: ${err.message}`;
      } else {
        this.lastError = String(err);
      }
      this.emit(null, false);
      return;
    }
    this.cache.put(key, response);
    // stale guard: drop unless this is still the newest request and the
    // state still matches what was asked for
    if (!this.guard.isCurrent(seq)) return;
    if (key !== sweepKey(this.state, this.requestLambdas())) return;
    this.emit(response, false);
  }

  private emit(response: SweepResponse | null, loading: boolean): void {
    this.render({
      state: this.getState(),
      response,
      loading,
      error: this.lastError,
    });
  }
}
