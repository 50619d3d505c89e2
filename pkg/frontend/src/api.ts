import type {
  CasesResponse,
  HealthResponse,
  InferRequest,
  InferResponse,
  MetabolitesResponse,
  SweepRequest,
  SweepResponse,
} from './types';

export class ServiceUnavailableError extends Error {}

export class ServiceRequestError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

/** Thin typed wrapper over the inference-service HTTP API. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (err) {
      if (err instanceof DOMException && err.name === 'AbortError') throw err;
      throw new ServiceUnavailableError(`service unreachable: ${String(err)}`);
    }
    if (!res.ok) {
      let code = 'http_error';
      let message = `HTTP ${res.status}`;
      try {
        const body = await res.json();
        if (typeof body.code === 'string') code = body.code;
        if (typeof body.message === 'string') message = body.message;
      } catch {
        // non-JSON error body; keep the defaults
      }
      throw new ServiceRequestError(res.status, code, message);
    }
    return res.json() as Promise<T>;
  }

  private post<T>(path: string, body: unknown, signal?: AbortSignal): Promise<T> {
    return this.request<T>(path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
      signal,
    });
  }

  health(): Promise<HealthResponse> {
    return this.request('/health');
  }

  cases(): Promise<CasesResponse> {
    return this.request('/cases');
  }

  metabolites(): Promise<MetabolitesResponse> {
    return this.request('/metabolites');
  }

  infer(req: InferRequest, signal?: AbortSignal): Promise<InferResponse> {
    return this.post('/infer', req, signal);
  }

  sweep(req: SweepRequest, signal?: AbortSignal): Promise<SweepResponse> {
    return this.post('/infer/sweep', req, signal);
  }
}
