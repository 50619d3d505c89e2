import type { RenderPayload } from './controller';
import { LAMBDA_MAX, RECOMMENDED_LAMBDA_MAX } from './state';
import type { ImageBody, Metrics, SweepResponse, SweepResult } from './types';

export interface RenderTargets {
  banner: HTMLElement;
  panels: HTMLElement;
  status: HTMLElement;
  recommendedBand: HTMLElement;
}

export function pngUrl(image: ImageBody): string {
  return `data:image/png;base64,${image.png_base64}`;
}

/** Formats service-reported metrics verbatim (no client-side math). */
export function metricsLabel(metrics: Metrics | undefined): string {
  if (!metrics) return '';
  return `PSNR ${metrics.psnr.toFixed(2)} dB · SSIM ${metrics.ssim.toFixed(4)} · HF ${metrics.hf_energy.toFixed(4)}`;
}

export function selectResult(response: SweepResponse, lambda: number): SweepResult | null {
  let best: SweepResult | null = null;
  for (const r of response.results) {
    if (best === null || Math.abs(r.lambda - lambda) < Math.abs(best.lambda - lambda)) {
      best = r;
    }
  }
  return best;
}

function panel(
  doc: Document,
  label: string,
  image: ImageBody | undefined,
  metrics: Metrics | undefined,
  extraClass = '',
): HTMLElement {
  const cell = doc.createElement('figure');
  cell.className = `panel ${extraClass}`.trim();
  if (image) {
    const img = doc.createElement('img');
    img.src = pngUrl(image);
    img.alt = label;
    img.width = image.shape[1];
    img.height = image.shape[0];
    cell.appendChild(img);
  } else {
    const missing = doc.createElement('div');
    missing.className = 'missing';
    missing.textContent = 'unavailable';
    cell.appendChild(missing);
  }
  const caption = doc.createElement('figcaption');
  const title = doc.createElement('strong');
  title.textContent = label;
  caption.appendChild(title);
  const line = doc.createElement('span');
  line.className = 'metrics';
  line.textContent = metricsLabel(metrics);
  caption.appendChild(line);
  cell.appendChild(caption);
  return cell;
}

export function renderStudio(
  targets: RenderTargets,
  payload: RenderPayload,
  onStripClick: (lambda: number) => void,
): void {
  const doc = targets.panels.ownerDocument;
  const { state, response, loading, error } = payload;

  targets.banner.hidden = error === null;
  targets.banner.textContent = error ?? '';

  targets.status.textContent = loading
    ? 'loading…'
    : state.caseId === null
      ? 'select a case to begin'
      : '';

  // recommended operating band on the slider track
  const bandFraction = RECOMMENDED_LAMBDA_MAX / LAMBDA_MAX;
  targets.recommendedBand.style.width = `${(bandFraction * 100).toFixed(1)}%`;
  targets.recommendedBand.title = `recommended band: lambda in [0, ${RECOMMENDED_LAMBDA_MAX}]`;

  targets.panels.replaceChildren();
  if (!response) return;

  if (state.viewMode === 'side-by-side') {
    const current = selectResult(response, state.lambda);
    targets.panels.appendChild(panel(doc, 'zero-fill', response.baseline_image, response.baseline_metrics));
    if (current) {
      targets.panels.appendChild(
        panel(doc, `SR λ=${current.lambda}`, current.sr_image, current.metrics, 'current'),
      );
    }
    if (response.gt_image) {
      targets.panels.appendChild(panel(doc, 'ground truth', response.gt_image, undefined));
    }
  } else {
    targets.panels.appendChild(panel(doc, 'zero-fill', response.baseline_image, response.baseline_metrics));
    for (const r of response.results) {
      const cell = panel(
        doc,
        `λ=${r.lambda}`,
        r.sr_image,
        r.metrics,
        r.lambda === state.lambda ? 'current' : '',
      );
      cell.addEventListener('click', () => onStripClick(r.lambda));
      targets.panels.appendChild(cell);
    }
    if (response.gt_image) {
      targets.panels.appendChild(panel(doc, 'ground truth', response.gt_image, undefined));
    }
  }
}
