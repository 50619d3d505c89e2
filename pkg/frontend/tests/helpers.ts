import type { ImageBody, Metrics, SweepRequest, SweepResponse, SweepResult } from '../src/types';

// 1x1 transparent PNG, valid enough for an <img> src
const TINY_PNG =
  'iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNkYPhfDwAChwGA60e6kgAAAABJRU5ErkJggg==';

export function fakeImage(tag: string): ImageBody {
  return { png_base64: TINY_PNG, raw_float32_base64: btoa(tag), shape: [64, 64] };
}

export function fakeMetrics(seed: number): Metrics {
  return {
    psnr: 30 + seed,
    ssim: 0.9 - seed / 100,
    ms_ssim: 0.95 - seed / 100,
    hf_energy: 0.1 + seed / 10,
    valid_pixel_count: 4000,
  };
}

export function fakeSweepResponse(req: SweepRequest): SweepResponse {
  const results: SweepResult[] = req.lambdas.map((lambda, i) => ({
    lambda,
    sr_image: fakeImage(`${req.case_id}/${req.metabolite}/${req.n}/${lambda}`),
    metrics: fakeMetrics(i),
  }));
  return {
    case_id: req.case_id,
    n: req.n,
    metabolite: req.metabolite,
    results,
    warnings: [],
    baseline_image: fakeImage(`${req.case_id}/baseline`),
    baseline_metrics: fakeMetrics(99),
    gt_image: fakeImage(`${req.case_id}/gt`),
  };
}

/** Mock sweep API recording every request; resolution order is manual. */
export class MockSweepApi {
  requests: SweepRequest[] = [];
  private pending: Array<{
    req: SweepRequest;
    resolve: (r: SweepResponse) => void;
    reject: (e: unknown) => void;
  }> = [];

  sweep(req: SweepRequest, signal?: AbortSignal): Promise<SweepResponse> {
    this.requests.push(req);
    return new Promise((resolve, reject) => {
      signal?.addEventListener('abort', () => reject(new DOMException('aborted', 'AbortError')));
      this.pending.push({ req, resolve, reject });
    });
  }

  /** Resolves the i-th outstanding request (default: oldest). */
  resolveRequest(index = 0): SweepRequest {
    const entry = this.pending.splice(index, 1)[0];
    if (!entry) throw new Error('no pending request');
    entry.resolve(fakeSweepResponse(entry.req));
    return entry.req;
  }

  rejectRequest(error: unknown, index = 0): void {
    const entry = this.pending.splice(index, 1)[0];
    if (!entry) throw new Error('no pending request');
    entry.reject(error);
  }

  get pendingCount(): number {
    return this.pending.length;
  }
}

export function flushMicrotasks(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
