import itertools

import numpy as np
import pytest
import torch

from mcmsr.losses import (
    LossWeights,
    SSIM_SIGMA,
    SSIM_WINDOW,
    hf_energy,
    metric_report,
    ms_ssim,
    pixel_loss,
    psnr,
    ssim,
    structural_loss,
    total_loss,
    wgan_losses,
    wilcoxon_signed_rank,
)

RNG = np.random.default_rng(99)


# ---------------------------------------------------------------------------
# pixel loss

def test_pixel_loss_trivials():
    x = RNG.random((16, 16))
    assert pixel_loss(x, x).item() == 0.0
    assert pixel_loss(x + 0.1, x).item() == pytest.approx(0.1, abs=1e-12)


def test_pixel_loss_matches_loop_oracle():
    s, i = RNG.random((12, 12)), RNG.random((12, 12))
    mask = RNG.random((12, 12)) > 0.3
    acc = cnt = 0
    for r in range(12):
        for c in range(12):
            if mask[r, c]:
                acc += abs(s[r, c] - i[r, c])
                cnt += 1
    assert pixel_loss(s, i, mask).item() == pytest.approx(acc / cnt, abs=1e-7)


def test_pixel_loss_empty_mask():
    with pytest.raises(ValueError):
        pixel_loss(np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((4, 4)))


# ---------------------------------------------------------------------------
# PSNR

def test_psnr_examples():
    x = RNG.random((16, 16))
    assert psnr(x, x) == 100.0
    assert psnr(x + 0.1, x) == pytest.approx(20.0, abs=1e-9)


def test_psnr_matches_formula_oracle():
    s, i = RNG.random((16, 16)), RNG.random((16, 16))
    mask = RNG.random((16, 16)) > 0.4
    mse = np.mean([(s[r, c] - i[r, c]) ** 2 for r in range(16) for c in range(16) if mask[r, c]])
    assert psnr(s, i, mask) == pytest.approx(10 * np.log10(1.0 / mse), abs=1e-6)


def test_psnr_decreases_with_noise():
    x = RNG.random((32, 32))
    vals = [psnr(x + a * RNG.choice([-1, 1], size=x.shape), x) for a in (0.01, 0.05, 0.1)]
    assert vals[0] > vals[1] > vals[2]


# ---------------------------------------------------------------------------
# SSIM

def gaussian_window():
    half = (SSIM_WINDOW - 1) / 2
    g = np.exp(-((np.arange(SSIM_WINDOW) - half) ** 2) / (2 * SSIM_SIGMA**2))
    g /= g.sum()
    return np.outer(g, g)


def ssim_loop_oracle(a, b, mask=None):
    """Windowed double-loop SSIM, valid windows only."""
    w = gaussian_window()
    c1, c2 = 0.01**2, 0.03**2
    H, W = a.shape
    if mask is None:
        mask = np.ones_like(a, dtype=bool)
    vals = []
    for r in range(H - SSIM_WINDOW + 1):
        for c in range(W - SSIM_WINDOW + 1):
            pa = a[r : r + SSIM_WINDOW, c : c + SSIM_WINDOW]
            pb = b[r : r + SSIM_WINDOW, c : c + SSIM_WINDOW]
            pm = mask[r : r + SSIM_WINDOW, c : c + SSIM_WINDOW]
            if not pm.all():
                continue
            mu_a, mu_b = (pa * w).sum(), (pb * w).sum()
            va = (pa * pa * w).sum() - mu_a**2
            vb = (pb * pb * w).sum() - mu_b**2
            cov = (pa * pb * w).sum() - mu_a * mu_b
            vals.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a**2 + mu_b**2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def test_ssim_identity_and_symmetry():
    a, b = RNG.random((16, 16)), RNG.random((16, 16))
    assert ssim(a, a).item() == pytest.approx(1.0, abs=1e-12)
    assert ssim(a, b).item() == pytest.approx(ssim(b, a).item(), abs=1e-12)


def test_ssim_matches_loop_oracle():
    a, b = RNG.random((16, 16)), RNG.random((16, 16))
    assert ssim(a, b).item() == pytest.approx(ssim_loop_oracle(a, b), abs=1e-6)


def test_ssim_masked_matches_loop_oracle():
    a, b = RNG.random((20, 20)), RNG.random((20, 20))
    mask = RNG.random((20, 20)) > 0.1
    assert ssim(a, b, mask).item() == pytest.approx(ssim_loop_oracle(a, b, mask), abs=1e-6)


def test_ssim_flip_invariance():
    a, b = RNG.random((16, 16)), RNG.random((16, 16))
    assert ssim(a, b).item() == pytest.approx(ssim(a[::-1], b[::-1]).item(), abs=1e-10)


# ---------------------------------------------------------------------------
# MS-SSIM

def test_ms_ssim_identity_exact():
    x = RNG.random((64, 64))
    assert ms_ssim(x, x).item() == pytest.approx(1.0, abs=1e-12)
    assert structural_loss(x, x).item() == pytest.approx(0.0, abs=1e-12)


def test_ms_ssim_inverted_binary_near_floor():
    x = (RNG.random((64, 64)) > 0.5).astype(float)
    assert ms_ssim(x, 1 - x).item() < 0.2


def test_ms_ssim_flip_invariance():
    a, b = RNG.random((64, 64)), RNG.random((64, 64))
    assert ms_ssim(a, b).item() == pytest.approx(ms_ssim(a[::-1], b[::-1]).item(), abs=1e-10)


def test_ms_ssim_level_limit():
    with pytest.raises(ValueError):
        ms_ssim(np.zeros((16, 16)), np.zeros((16, 16)), levels=3)


# ---------------------------------------------------------------------------
# total loss

def test_total_loss_composition():
    s, i = RNG.random((64, 64)), RNG.random((64, 64))
    w = LossWeights(alpha=0.84, lambda_adv=0.0)
    expected = 0.16 * pixel_loss(s, i).item() + 0.84 * structural_loss(s, i).item()
    assert total_loss(s, i, None, w, 0.0).item() == pytest.approx(expected, rel=1e-9)
    assert total_loss(i, i, None, w, 0.0).item() == pytest.approx(0.0, abs=1e-12)


def test_total_loss_linear_in_lambda():
    s, i = RNG.random((64, 64)), RNG.random((64, 64))
    adv = 0.7
    l1 = total_loss(s, i, None, LossWeights(lambda_adv=0.02), adv).item()
    l2 = total_loss(s, i, None, LossWeights(lambda_adv=0.08), adv).item()
    assert l2 - l1 == pytest.approx(0.06 * adv, abs=1e-9)


def test_loss_weight_validation():
    with pytest.raises(ValueError):
        LossWeights(alpha=1.2)
    with pytest.raises(ValueError):
        LossWeights(lambda_adv=-1)


def test_total_loss_gradient_matches_finite_differences():
    s = torch.tensor(RNG.random((8, 8)), dtype=torch.float64, requires_grad=True)
    i = torch.tensor(RNG.random((8, 8)), dtype=torch.float64)
    w = LossWeights(lambda_adv=0.0)
    loss = total_loss(s, i, None, w, 0.0, levels=1)
    loss.backward()
    h = 1e-6
    for r, c in [(0, 0), (3, 5), (7, 2)]:
        sp = s.detach().clone()
        sp[r, c] += h
        sm = s.detach().clone()
        sm[r, c] -= h
        fd = (total_loss(sp, i, None, w, 0.0, levels=1) - total_loss(sm, i, None, w, 0.0, levels=1)).item() / (2 * h)
        assert abs(fd - s.grad[r, c].item()) / max(abs(fd), 1e-8) < 1e-3


# ---------------------------------------------------------------------------
# WGAN losses

class TinyCritic(torch.nn.Module):
    def __init__(self):
        super().__init__()
        self.w = torch.nn.Parameter(torch.randn(1, 1, 3, 3, dtype=torch.float64) * 0.3)

    def forward(self, x):
        return torch.nn.functional.conv2d(x, self.w).flatten(1).mean(dim=1)


def test_wgan_constant_critic():
    c_value = 1.7
    critic = lambda x: torch.full((x.shape[0],), c_value, dtype=x.dtype)
    real = torch.rand(4, 1, 8, 8, dtype=torch.float64)
    fake = torch.rand(4, 1, 8, 8, dtype=torch.float64).requires_grad_(True)

    class ConstCritic(torch.nn.Module):
        def forward(self, x):
            return x.flatten(1).sum(dim=1) * 0.0 + c_value

    closs, gloss = wgan_losses(ConstCritic(), real, fake, gp_weight=10.0)
    # gradient norm is 0 everywhere, so the penalty is (0-1)^2 = 1
    assert closs.item() == pytest.approx(10.0, abs=1e-9)
    assert gloss.item() == pytest.approx(-c_value, abs=1e-9)
    del critic


def test_wgan_zero_gp_identical_batches():
    torch.manual_seed(0)
    critic = TinyCritic()
    batch = torch.rand(4, 1, 8, 8, dtype=torch.float64)
    closs, _ = wgan_losses(critic, batch, batch.clone(), gp_weight=0.0)
    assert closs.item() == pytest.approx(0.0, abs=1e-9)


def test_wgan_gradient_penalty_matches_finite_differences():
    torch.manual_seed(1)
    critic = TinyCritic()
    x = torch.rand(1, 1, 6, 6, dtype=torch.float64)
    # analytic gradient norm via autograd
    xr = x.clone().requires_grad_(True)
    (g,) = torch.autograd.grad(critic(xr).sum(), xr)
    # finite-difference gradient norm
    h = 1e-6
    fd = torch.zeros_like(x)
    for r in range(6):
        for c in range(6):
            xp, xm = x.clone(), x.clone()
            xp[0, 0, r, c] += h
            xm[0, 0, r, c] -= h
            fd[0, 0, r, c] = (critic(xp) - critic(xm)).item() / (2 * h)
    assert abs(g.norm().item() - fd.norm().item()) / fd.norm().item() < 1e-3


def test_wgan_batch_size_mismatch():
    with pytest.raises(ValueError):
        wgan_losses(TinyCritic(), torch.rand(2, 1, 8, 8, dtype=torch.float64), torch.rand(3, 1, 8, 8, dtype=torch.float64), 10.0)


# ---------------------------------------------------------------------------
# high-frequency energy proxy

def test_hf_energy_constant_zero():
    assert hf_energy(np.full((64, 64), 0.5)) == pytest.approx(0.0, abs=1e-12)


def test_hf_energy_checkerboard_near_one():
    idx = np.indices((64, 64)).sum(axis=0)
    board = (idx % 2).astype(float) * 2.0 - 1.0  # zero-mean, all energy at Nyquist
    assert hf_energy(board) > 0.95


def test_hf_energy_cutoff_validation():
    with pytest.raises(ValueError):
        hf_energy(np.zeros((8, 8)), cutoff_fraction=1.5)


def test_hf_energy_lowres_below_ground_truth():
    from mcmsr.kspace import degrade
    from mcmsr.phantom import PhantomSpec, generate_phantom

    spec = PhantomSpec(seed=21)
    wins = 0
    total = 0
    for i in range(20):
        gt = generate_phantom(spec, i).metabolite_maps["tCho"]
        low = degrade(gt, 16)
        total += 1
        if hf_energy(low) < hf_energy(gt):
            wins += 1
    assert wins >= 0.95 * total


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank

def wilcoxon_enumeration_oracle(d):
    """Brute-force two-sided p over all sign assignments of |d| ranks."""
    from scipy.stats import rankdata

    d = np.asarray(d, dtype=float)
    d = d[d != 0]
    ranks = rankdata(np.abs(d))
    w_obs = ranks[d > 0].sum()
    n = len(d)
    le = ge = 0
    for signs in itertools.product([0, 1], repeat=n):
        w = sum(r for s, r in zip(signs, ranks) if s)
        le += w <= w_obs + 1e-9
        ge += w >= w_obs - 1e-9
    return min(1.0, 2.0 * min(le, ge) / 2**n)


def test_wilcoxon_all_positive_six_pairs():
    a = np.arange(6, dtype=float)
    assert wilcoxon_signed_rank(a, a + 1) == pytest.approx(2 / 64)


def test_wilcoxon_symmetric_differences():
    a = np.zeros(6)
    b = np.array([1.0, -1.0, 2.0, -2.0, 3.0, -3.0])
    assert wilcoxon_signed_rank(a, b) == pytest.approx(1.0)


def test_wilcoxon_exact_matches_enumeration():
    for n in range(5, 11):
        for trial in range(5):
            rng = np.random.default_rng(n * 100 + trial)
            d = np.round(rng.normal(0.3, 1.0, size=n), 1)
            d = d[d != 0]
            if len(d) < 5:
                continue
            a = np.zeros(len(d))
            assert wilcoxon_signed_rank(a, d) == pytest.approx(wilcoxon_enumeration_oracle(d), abs=1e-12)


def test_wilcoxon_degenerate_and_argument_errors():
    with pytest.raises(ValueError):
        wilcoxon_signed_rank(np.ones(6), np.ones(6))
    with pytest.raises(ValueError):
        wilcoxon_signed_rank(np.ones(3), np.ones(3))


def test_wilcoxon_normal_approximation_sane():
    rng = np.random.default_rng(5)
    a = rng.normal(size=50)
    b = a + 0.8  # strong positive shift
    assert wilcoxon_signed_rank(a, b) < 0.001
    c = a + rng.normal(scale=1e-3, size=50)  # no systematic shift
    assert wilcoxon_signed_rank(a, c) > 0.05


# ---------------------------------------------------------------------------
# metric report

def test_metric_report_fields():
    gt = RNG.random((64, 64))
    est = gt + 0.01 * RNG.standard_normal((64, 64))
    mask = np.ones((64, 64), dtype=bool)
    mask[:2] = False
    rep = metric_report(est, gt, mask)
    assert rep.valid_pixel_count == int(mask.sum())
    assert 0 <= rep.ssim <= 1 and rep.psnr > 20
