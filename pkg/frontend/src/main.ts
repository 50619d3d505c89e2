import { ApiClient } from './api';
import { StudioController } from './controller';
import { renderStudio } from './render';
import type { RenderTargets } from './render';

const N_CHOICES = [16, 18, 20, 22, 24, 26, 28, 30, 32];

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

async function boot(): Promise<void> {
  const api = new ApiClient(import.meta.env.VITE_API_BASE ?? '/api');
  const targets: RenderTargets = {
    banner: el('banner'),
    panels: el('panels'),
    status: el('status'),
    recommendedBand: el('recommended-band'),
  };
  const lambdaSlider = el<HTMLInputElement>('lambda-slider');
  const lambdaValue = el('lambda-value');
  const caseSelect = el<HTMLSelectElement>('case-select');
  const metaboliteSelect = el<HTMLSelectElement>('metabolite-select');
  const nSelect = el<HTMLSelectElement>('n-select');
  const viewSelect = el<HTMLSelectElement>('view-select');

  const controller = new StudioController(api, (payload) => {
    renderStudio(targets, payload, (lambda) => {
      lambdaSlider.value = String(lambda);
      lambdaValue.textContent = lambda.toFixed(3);
      controller.setLambda(lambda);
    });
  });

  for (const n of N_CHOICES) {
    const opt = document.createElement('option');
    opt.value = String(n);
    opt.textContent = String(n);
    nSelect.appendChild(opt);
  }

  lambdaSlider.addEventListener('input', () => {
    const value = Number(lambdaSlider.value);
    lambdaValue.textContent = value.toFixed(3);
    controller.setLambda(value);
  });
  caseSelect.addEventListener('change', () => controller.setCase(caseSelect.value));
  metaboliteSelect.addEventListener('change', () => controller.setMetabolite(metaboliteSelect.value));
  nSelect.addEventListener('change', () => controller.setN(Number(nSelect.value)));
  viewSelect.addEventListener('change', () =>
    controller.setViewMode(viewSelect.value === 'sweep' ? 'sweep' : 'side-by-side'),
  );

  try {
    const [health, cases, metabolites] = await Promise.all([api.health(), api.cases(), api.metabolites()]);
    el('variant').textContent = `${health.variant} · ${health.target_size}×${health.target_size}`;
    for (const name of metabolites.metabolites) {
      const opt = document.createElement('option');
      opt.value = name;
      opt.textContent = name;
      if (name === 'Gly') opt.selected = true;
      metaboliteSelect.appendChild(opt);
    }
    for (const entry of cases.cases) {
      const opt = document.createElement('option');
      opt.value = entry.case_id;
      opt.textContent = entry.case_id;
      caseSelect.appendChild(opt);
    }
    if (cases.cases.length > 0) {
      caseSelect.value = cases.cases[0].case_id;
      controller.setCase(caseSelect.value);
    }
  } catch (err) {
    targets.banner.hidden = false;
    targets.banner.textContent = `Inference service unreachable: ${String(err)}`;
  }
}

void boot();
