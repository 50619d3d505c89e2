// Mirrors the inference-service JSON bodies exactly; the client never
// computes metrics itself, it only displays what the service returns.

export interface HealthResponse {
  status: string;
  variant: string;
  channels: number[];
  target_size: number;
}

export interface CaseEntry {
  case_id: string;
  metabolites: string[];
  has_ground_truth: boolean;
}

export interface CasesResponse {
  cases: CaseEntry[];
}

export interface MetabolitesResponse {
  metabolites: string[];
}

export interface ImageBody {
  png_base64: string;
  raw_float32_base64: string;
  shape: number[];
}

export interface Metrics {
  psnr: number;
  ssim: number;
  ms_ssim: number;
  hf_energy: number;
  valid_pixel_count: number;
}

export interface InferRequest {
  case_id: string;
  n: number;
  metabolite: string;
  lambda_adv: number;
  include_baseline?: boolean;
  include_ground_truth?: boolean;
}

export interface InferResponse {
  sr_image: ImageBody;
  baseline_image?: ImageBody;
  gt_image?: ImageBody;
  metrics?: Metrics;
  condition_echo: { n: number; metabolite: string; lambda: number };
  warnings: string[];
}

export interface SweepRequest {
  case_id: string;
  n: number;
  metabolite: string;
  lambdas: number[];
  include_baseline?: boolean;
  include_ground_truth?: boolean;
}

export interface SweepResult {
  lambda: number;
  sr_image: ImageBody;
  metrics: Metrics;
}

export interface SweepResponse {
  case_id: string;
  n: number;
  metabolite: string;
  results: SweepResult[];
  warnings: string[];
  baseline_image?: ImageBody;
  baseline_metrics?: Metrics;
  gt_image?: ImageBody;
}

export interface ApiError {
  code: string;
  message: string;
}
