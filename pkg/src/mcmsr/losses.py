"""Training losses and evaluation metrics.

The differentiable pieces (L1, SSIM, MS-SSIM, WGAN-GP) are written against
torch tensors shaped (B, 1, H, W) and return one value per batch element.
Metric wrappers accept plain 2D numpy arrays plus a validity mask; windowed
metrics only count windows whose pixels are all valid, so quality-rejected
pixels never contaminate the statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from scipy.stats import norm, rankdata

from .kspace import forward_dft, center_window

SSIM_WINDOW = 7
SSIM_SIGMA = 1.5
# first three canonical MS-SSIM scale weights, renormalized to sum 1
# (the full 5-level setting needs images of at least 176 px)
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001)
PSNR_CAP_DB = 100.0


@dataclass
class LossWeights:
    alpha: float = 0.84
    lambda_adv: float = 0.0
    gp_weight: float = 10.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.lambda_adv < 0 or self.gp_weight < 0:
            raise ValueError("lambda_adv and gp_weight must be >= 0")


@dataclass
class MetricReport:
    psnr: float
    ssim: float
    ms_ssim: float
    hf_energy: float
    valid_pixel_count: int


def _as_batch(x) -> torch.Tensor:
    if torch.is_tensor(x):
        t = x.to(torch.float64) if x.is_floating_point() else x
    else:
        t = torch.as_tensor(np.ascontiguousarray(x), dtype=torch.float64)
    if t.ndim == 2:
        t = t[None, None]
    elif t.ndim == 3:
        t = t[:, None]
    return t


def _gaussian_window(dtype, device) -> torch.Tensor:
    half = (SSIM_WINDOW - 1) / 2
    coords = torch.arange(SSIM_WINDOW, dtype=dtype, device=device) - half
    g = torch.exp(-(coords**2) / (2 * SSIM_SIGMA**2))
    g = g / g.sum()
    return (g[:, None] * g[None, :])[None, None]


def _valid_window_mask(mask: torch.Tensor) -> torch.Tensor:
    """True where every pixel of the SSIM window is valid (valid-mode conv)."""
    counts = F.conv2d(mask.to(torch.float64), torch.ones(1, 1, SSIM_WINDOW, SSIM_WINDOW, dtype=torch.float64, device=mask.device))
    return counts >= SSIM_WINDOW * SSIM_WINDOW - 0.5


def _ssim_maps(a: torch.Tensor, b: torch.Tensor, data_range: float = 1.0):
    """Per-pixel luminance and contrast-structure maps (valid-mode)."""
    w = _gaussian_window(a.dtype, a.device)
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    mu_a = F.conv2d(a, w)
    mu_b = F.conv2d(b, w)
    var_a = F.conv2d(a * a, w) - mu_a**2
    var_b = F.conv2d(b * b, w) - mu_b**2
    cov = F.conv2d(a * b, w) - mu_a * mu_b
    lum = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    cs = (2 * cov + c2) / (var_a + var_b + c2)
    return lum, cs


def _masked_mean(maps: torch.Tensor, valid: torch.Tensor) -> torch.Tensor:
    denom = valid.to(maps.dtype).sum(dim=(1, 2, 3)).clamp(min=1.0)
    return (maps * valid).sum(dim=(1, 2, 3)) / denom


def ssim(a, b, mask=None, data_range: float = 1.0) -> torch.Tensor:
    """Single-scale SSIM per batch element, masked window mean."""
    a, b = _as_batch(a), _as_batch(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if mask is None:
        mask = torch.ones_like(a, dtype=torch.bool)
    else:
        mask = _as_batch(mask) > 0.5
    valid = _valid_window_mask(mask)
    if not bool(valid.any()):
        raise ValueError("no fully-valid SSIM windows in mask")
    lum, cs = _ssim_maps(a, b, data_range)
    return _masked_mean(lum * cs, valid)


def ms_ssim(a, b, mask=None, levels: int = 3, data_range: float = 1.0) -> torch.Tensor:
    """Multiscale SSIM per batch element.

    Contrast-structure terms at every level, luminance folded in at the last
    level, weighted by the renormalized canonical exponents.  Differentiable.
    """
    a, b = _as_batch(a), _as_batch(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if levels < 1 or levels > len(MSSSIM_WEIGHTS):
        raise ValueError(f"levels must be in [1, {len(MSSSIM_WEIGHTS)}]")
    if a.shape[-1] // 2 ** (levels - 1) < SSIM_WINDOW:
        raise ValueError(f"image of size {a.shape[-1]} too small for {levels} levels")
    if mask is None:
        mask = torch.ones_like(a, dtype=torch.bool)
    else:
        mask = _as_batch(mask) > 0.5

    weights = torch.tensor(MSSSIM_WEIGHTS[:levels], dtype=a.dtype, device=a.device)
    weights = weights / weights.sum()

    result = torch.ones(a.shape[0], dtype=a.dtype, device=a.device)
    for lvl in range(levels):
        valid = _valid_window_mask(mask)
        if not bool(valid.any()):
            raise ValueError("no fully-valid windows at some MS-SSIM level")
        lum, cs = _ssim_maps(a, b, data_range)
        if lvl == levels - 1:
            term = _masked_mean(lum * cs, valid)
        else:
            term = _masked_mean(cs, valid)
        result = result * torch.clamp(term, min=1e-8) ** weights[lvl]
        if lvl < levels - 1:
            a = F.avg_pool2d(a, 2)
            b = F.avg_pool2d(b, 2)
            # majority vote: a coarse pixel stays valid if most of its
            # sources are (strict all-valid would leave no usable windows
            # under sparse random rejection)
            mask = F.avg_pool2d(mask.to(a.dtype), 2) > 0.5
    return result


def pixel_loss(s, i, mask=None) -> torch.Tensor:
    """Mean absolute difference over valid pixels, per batch element."""
    s, i = _as_batch(s), _as_batch(i)
    if s.shape != i.shape:
        raise ValueError(f"shape mismatch: {tuple(s.shape)} vs {tuple(i.shape)}")
    if mask is None:
        mask = torch.ones_like(s, dtype=torch.bool)
    else:
        mask = _as_batch(mask) > 0.5
    counts = mask.to(s.dtype).sum(dim=(1, 2, 3))
    if bool((counts == 0).any()):
        raise ValueError("quality mask has no valid pixels")
    return (torch.abs(s - i) * mask).sum(dim=(1, 2, 3)) / counts


def structural_loss(s, i, mask=None, levels: int = 3) -> torch.Tensor:
    return 1.0 - ms_ssim(s, i, mask, levels=levels)


def total_loss(s, i, mask, weights: LossWeights, generator_adv_term, levels: int = 3) -> torch.Tensor:
    """Weighted sum of pixelwise, structural and adversarial components."""
    adv = torch.as_tensor(generator_adv_term, dtype=torch.float64)
    return (
        (1.0 - weights.alpha) * pixel_loss(s, i, mask).mean()
        + weights.alpha * structural_loss(s, i, mask, levels=levels).mean()
        + weights.lambda_adv * adv.mean()
    )


def wgan_losses(critic, real_batch: torch.Tensor, fake_batch: torch.Tensor, gp_weight: float):
    """Wasserstein critic and generator losses with gradient penalty."""
    if real_batch.shape[0] != fake_batch.shape[0]:
        raise ValueError("real and fake batch sizes differ")
    score_real = critic(real_batch)
    score_fake = critic(fake_batch)
    critic_loss = score_fake.mean() - score_real.mean()
    eps = torch.rand(real_batch.shape[0], 1, 1, 1, dtype=real_batch.dtype, device=real_batch.device)
    mixed = (eps * real_batch + (1 - eps) * fake_batch).requires_grad_(True)
    score_mixed = critic(mixed)
    (grad,) = torch.autograd.grad(
        score_mixed.sum(), mixed, create_graph=True, retain_graph=True
    )
    grad_norm = grad.flatten(1).norm(2, dim=1)
    penalty = ((grad_norm - 1.0) ** 2).mean()
    critic_loss = critic_loss + gp_weight * penalty
    generator_loss = -score_fake.mean()
    return critic_loss, generator_loss


# ---------------------------------------------------------------------------
# evaluation metrics (plain arrays in, floats out)

def psnr(s: np.ndarray, i: np.ndarray, mask=None, data_range: float = 1.0) -> float:
    s, i = np.asarray(s, dtype=np.float64), np.asarray(i, dtype=np.float64)
    if s.shape != i.shape:
        raise ValueError(f"shape mismatch: {s.shape} vs {i.shape}")
    if mask is None:
        mask = np.ones_like(s, dtype=bool)
    mask = np.asarray(mask).astype(bool)
    if not mask.any():
        raise ValueError("quality mask has no valid pixels")
    mse = float(np.mean((s[mask] - i[mask]) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(data_range**2 / mse))


def hf_energy(image: np.ndarray, cutoff_fraction: float = 0.5) -> float:
    """Fraction of spectral energy outside the centered low-frequency window."""
    if not 0.0 < cutoff_fraction < 1.0:
        raise ValueError("cutoff_fraction must be in (0, 1)")
    image = np.asarray(image, dtype=np.float64)
    k = forward_dft(image)
    total = k.energy()
    if total == 0.0:
        return 0.0
    side = int(round(cutoff_fraction * image.shape[0]))
    w = center_window(image.shape[0], side)
    inside = float(np.sum(np.abs(k.values[w, w]) ** 2))
    return (total - inside) / total


def metric_report(s: np.ndarray, i: np.ndarray, mask: np.ndarray) -> MetricReport:
    mask = np.asarray(mask).astype(bool)
    return MetricReport(
        psnr=float(psnr(s, i, mask)),
        ssim=float(ssim(s, i, mask).item()),
        ms_ssim=float(ms_ssim(s, i, mask).item()),
        hf_energy=float(hf_energy(np.where(mask, s, 0.0))),
        valid_pixel_count=int(mask.sum()),
    )


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank test

EXACT_LIMIT = 25


def wilcoxon_signed_rank(paired_a, paired_b) -> float:
    """Two-sided p-value for paired samples.

    Zero differences are dropped; ties get average ranks.  The exact null
    distribution is used for up to 25 non-zero differences, above that a
    normal approximation with tie correction and continuity correction.
    """
    a = np.asarray(paired_a, dtype=np.float64)
    b = np.asarray(paired_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be equal-length 1D sequences")
    if len(a) < 5:
        raise ValueError("need at least 5 pairs")
    d = b - a
    d = d[d != 0]
    n = len(d)
    if n == 0:
        raise ValueError("all differences are zero; test is degenerate")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())

    if n <= EXACT_LIMIT:
        return _exact_p(ranks, w_plus)

    mu = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts**3 - tie_counts) / 48.0
    # continuity correction toward the mean
    shift = 0.5 if w_plus > mu else (-0.5 if w_plus < mu else 0.0)
    z = (w_plus - shift - mu) / np.sqrt(var)
    return float(min(1.0, 2.0 * norm.sf(abs(z))))


def _exact_p(ranks: np.ndarray, w_plus: float) -> float:
    # doubled integer ranks so tied average ranks (x.5) stay exact
    r2 = np.round(2 * ranks).astype(int)
    total = int(r2.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in r2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:-r]
        counts = counts + shifted
    n_assignments = 2.0 ** len(r2)
    w2 = int(round(2 * w_plus))
    p_le = counts[: w2 + 1].sum() / n_assignments
    p_ge = counts[w2:].sum() / n_assignments
    return float(min(1.0, 2.0 * min(p_le, p_ge)))
