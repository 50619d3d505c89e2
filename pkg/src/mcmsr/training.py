"""Conditioned training loop.

Each training sample draws its own (n, lambda) and inherits m from the
metabolite map that was drawn; the critic and generator alternate, with the
critic update skipped whenever the whole batch has lambda = 0.  Batch
composition is a pure function of (seed, epoch), so runs are reproducible.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from . import METABOLITES, TARGET_SIZE
from .kspace import embed_window, kspace_truncate, window_mask, zero_fill_upsample
from .losses import LossWeights, pixel_loss, ssim, structural_loss, wgan_losses
from .model import (
    ConditionTuple,
    Critic,
    NetConfig,
    SRGenerator,
    save_checkpoint,
    torch_data_consistency_masked,
)
from .phantom import PhantomCase, augment, load_case

N_VALUES = tuple(range(16, 33, 2))  # the 9 training resolutions


@dataclass
class TrainConfig:
    variant: str = "filter_scaling"
    channels: list[int] = field(default_factory=lambda: [8, 16, 32, 64, 128])
    batch_size: int = 8
    learning_rate: float = 1e-4
    epochs: int = 100
    n_values: tuple[int, ...] = N_VALUES
    lambda_max: float = 0.1
    alpha: float = 0.84
    gp_weight: float = 10.0
    critic_steps_per_gen: int = 1
    seed: int = 0
    fixed_n: int | None = None  # single_scale only
    adversarial: bool = False  # False forces lambda = 0 throughout
    augment: bool = True
    val_n_values: tuple[int, ...] | None = None  # default: n_values

    def __post_init__(self):
        if any(n % 2 for n in self.n_values):
            raise ValueError("n_values must be even")
        if self.lambda_max < 0:
            raise ValueError("lambda_max must be >= 0")
        if self.variant == "single_scale" and self.fixed_n is None:
            raise ValueError("single_scale training needs fixed_n")

    @property
    def effective_n_values(self) -> tuple[int, ...]:
        return (self.fixed_n,) if self.fixed_n is not None else self.n_values

    def net_config(self) -> NetConfig:
        return NetConfig(channels=list(self.channels), variant=self.variant)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_values"] = list(self.n_values)
        d["val_n_values"] = list(self.val_n_values) if self.val_n_values else None
        return d

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:12]


def desk_preset(variant: str, **overrides) -> TrainConfig:
    """CI-friendly schedule: small channels, few epochs."""
    base = dict(
        variant=variant,
        channels=[4, 8, 16, 32, 64],
        epochs=20,
        val_n_values=(16, 24, 32),
    )
    base.update(overrides)
    return TrainConfig(**base)


def full_preset(variant: str, **overrides) -> TrainConfig:
    base = dict(variant=variant, channels=[8, 16, 32, 64, 128], epochs=100)
    base.update(overrides)
    return TrainConfig(**base)


def sample_condition(rng: np.random.Generator, n_values=N_VALUES, lambda_max: float = 0.1) -> ConditionTuple:
    """Uniform n over the even grid, uniform lambda, uniform metabolite."""
    return ConditionTuple(
        n=int(rng.choice(n_values)),
        m=METABOLITES[int(rng.integers(len(METABOLITES)))],
        lambda_adv=float(rng.uniform(0.0, lambda_max)),
    )


def build_sample(case: PhantomCase, met: str, n: int):
    """(zero-filled input, gt, mask, measurement on the full grid) for one
    sample; the measurement comes as (embedded spectrum, window mask) so
    batches can mix window sizes."""
    gt = case.metabolite_maps[met]
    measured = kspace_truncate(gt, n)
    l_up = zero_fill_upsample(measured, gt.shape[0])
    N = gt.shape[0]
    return l_up, gt, case.quality_mask, embed_window(measured.values, N), window_mask(N, n)


def _to_batch(samples, device, dtype=torch.float32):
    l_up = torch.tensor(np.stack([s["l_up"] for s in samples]), dtype=dtype, device=device).unsqueeze(1)
    t1 = torch.tensor(np.stack([s["t1"] for s in samples]), dtype=dtype, device=device).unsqueeze(1)
    flair = torch.tensor(np.stack([s["flair"] for s in samples]), dtype=dtype, device=device).unsqueeze(1)
    gt = torch.tensor(np.stack([s["gt"] for s in samples]), dtype=dtype, device=device).unsqueeze(1)
    mask = torch.tensor(np.stack([s["mask"] for s in samples]).astype(np.float32), device=device).unsqueeze(1)
    n = torch.tensor([s["n"] for s in samples], dtype=dtype, device=device)
    m_idx = torch.tensor([METABOLITES.index(s["m"]) for s in samples], device=device)
    lam = torch.tensor([s["lam"] for s in samples], dtype=dtype, device=device)
    embedded = torch.tensor(np.stack([s["embedded"] for s in samples]), dtype=torch.complex64, device=device)
    win = torch.tensor(np.stack([s["win"] for s in samples]), device=device)
    return l_up, t1, flair, gt, mask, n, m_idx, lam, embedded, win


def forward_sr(gen: SRGenerator, l_up, t1, flair, n, m_idx, lam, embedded, win) -> torch.Tensor:
    """Generator forward followed by the hard data-consistency projection."""
    raw = gen(l_up, t1, flair, n, m_idx, lam)
    return torch_data_consistency_masked(raw, embedded, win)


def train_step(gen, critic, gen_opt, critic_opt, batch, config: TrainConfig) -> dict:
    l_up, t1, flair, gt, mask, n, m_idx, lam, embedded, win = batch
    weights = LossWeights(alpha=config.alpha, gp_weight=config.gp_weight)
    any_adv = bool((lam > 0).any())

    critic_loss_val = 0.0
    if any_adv:
        for _ in range(config.critic_steps_per_gen):
            with torch.no_grad():
                fake = forward_sr(gen, l_up, t1, flair, n, m_idx, lam, embedded, win) * mask
            real = gt * mask
            critic_opt.zero_grad()
            critic_loss, _ = wgan_losses(critic, real, fake, config.gp_weight)
            critic_loss.backward()
            critic_opt.step()
            critic_loss_val = float(critic_loss.item())

    gen_opt.zero_grad()
    sr = forward_sr(gen, l_up, t1, flair, n, m_idx, lam, embedded, win) * mask
    target = gt * mask
    l_pix = pixel_loss(sr, target, mask)
    l_struct = structural_loss(sr, target, mask)
    if any_adv:
        adv_per_sample = -critic(sr)
    else:
        adv_per_sample = torch.zeros_like(l_pix)
    per_sample = (1 - weights.alpha) * l_pix + weights.alpha * l_struct + lam.to(l_pix.dtype) * adv_per_sample
    loss = per_sample.mean()
    if not torch.isfinite(loss):
        raise RuntimeError(
            "non-finite training loss: "
            + json.dumps({"pixel": l_pix.tolist(), "structural": l_struct.tolist(), "adv": adv_per_sample.tolist()})
        )
    loss.backward()
    gen_opt.step()
    return {
        "loss": float(loss.item()),
        "pixel": float(l_pix.mean().item()),
        "structural": float(l_struct.mean().item()),
        "adversarial": float(adv_per_sample.mean().item()),
        "lambda_mean": float(lam.mean().item()),
        "critic_loss": critic_loss_val,
    }


def _epoch_samples(cases: dict[str, PhantomCase], ids: list[str], config: TrainConfig, epoch: int):
    """Deterministic per-epoch sample stream: every (case, metabolite) pair
    once, shuffled, each with fresh augmentation and condition draws."""
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, epoch)))
    pairs = [(cid, m) for cid in ids for m in METABOLITES]
    order = rng.permutation(len(pairs))
    for k in order:
        cid, met = pairs[k]
        case = cases[cid]
        if config.augment:
            case = augment(case, rng)
        n = int(rng.choice(config.effective_n_values))
        lam = float(rng.uniform(0.0, config.lambda_max)) if config.adversarial else 0.0
        l_up, gt, mask, embedded, win = build_sample(case, met, n)
        yield {
            "l_up": l_up, "gt": gt, "mask": mask, "embedded": embedded, "win": win,
            "t1": case.t1, "flair": case.flair, "n": n, "m": met, "lam": lam,
        }


@torch.no_grad()
def validate(gen: SRGenerator, cases: dict[str, PhantomCase], ids: list[str], n_values, device="cpu", batch_size: int = 16) -> float:
    """Mean masked SSIM at lambda = 0 over cases x metabolites x n values."""
    gen.eval()
    samples = []
    for cid in ids:
        case = cases[cid]
        for met in METABOLITES:
            for n in n_values:
                l_up, gt, mask, embedded, win = build_sample(case, met, n)
                samples.append({
                    "l_up": l_up, "gt": gt, "mask": mask, "embedded": embedded, "win": win,
                    "t1": case.t1, "flair": case.flair, "n": n, "m": met, "lam": 0.0,
                })
    vals = []
    for i in range(0, len(samples), batch_size):
        chunk = samples[i : i + batch_size]
        l_up, t1, flair, gt, mask, n, m_idx, lam, embedded, win = _to_batch(chunk, device)
        sr = forward_sr(gen, l_up, t1, flair, n, m_idx, lam, embedded, win)
        vals.append(ssim(sr * mask, gt * mask, mask).numpy())
    gen.train()
    return float(np.concatenate(vals).mean())


def train(data_dir: Path, split: dict[str, list[str]], config: TrainConfig, out_dir: Path, device: str = "cpu", tag: str | None = None) -> dict:
    """Full training run for one fold; saves best-validation and final
    checkpoints plus a JSON-lines log.  Returns artifact paths and metrics."""
    data_dir, out_dir = Path(data_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    all_ids = split["train"] + split["val"]
    missing = [cid for cid in all_ids if not (data_dir / cid / "manifest.json").exists()]
    if missing:
        raise FileNotFoundError(f"cases missing from {data_dir}: {missing[:5]}")
    cases = {cid: load_case(data_dir / cid) for cid in all_ids}

    torch.manual_seed(config.seed)
    gen = SRGenerator(config.net_config()).to(device)
    critic = Critic().to(device)
    gen_opt = torch.optim.Adam(gen.parameters(), lr=config.learning_rate)
    critic_opt = torch.optim.Adam(critic.parameters(), lr=config.learning_rate)

    tag = tag or config.variant
    log_path = out_dir / f"{tag}_log.jsonl"
    best_path = out_dir / f"{tag}_best.ckpt"
    final_path = out_dir / f"{tag}_final.ckpt"
    header_base = {
        "train_config": config.to_dict(),
        "train_config_hash": config.config_hash(),
    }

    best_ssim = -1.0
    grad_touched: set[str] = set()
    val_n = config.val_n_values or config.effective_n_values
    with log_path.open("w") as log:
        step = 0
        for epoch in range(config.epochs):
            t0 = time.time()
            batch_buf = []
            for sample in _epoch_samples(cases, split["train"], config, epoch):
                batch_buf.append(sample)
                if len(batch_buf) < config.batch_size:
                    continue
                losses = train_step(gen, critic, gen_opt, critic_opt, _to_batch(batch_buf, device), config)
                batch_buf = []
                if epoch == 0:
                    for name, p in gen.named_parameters():
                        if p.grad is not None and bool((p.grad != 0).any()):
                            grad_touched.add(name)
                log.write(json.dumps({"kind": "step", "epoch": epoch, "step": step, **losses}) + "\n")
                step += 1
            val_ssim = validate(gen, cases, split["val"], val_n, device)
            log.write(json.dumps({
                "kind": "epoch", "epoch": epoch, "val_ssim": val_ssim,
                "seconds": round(time.time() - t0, 2),
            }) + "\n")
            log.flush()
            if val_ssim > best_ssim:
                best_ssim = val_ssim
                save_checkpoint(best_path, gen, {**header_base, "epoch": epoch, "val_ssim": val_ssim})
    save_checkpoint(final_path, gen, {**header_base, "epoch": config.epochs - 1, "val_ssim": best_ssim})
    untouched = sorted(set(dict(gen.named_parameters())) - grad_touched)
    return {
        "best": str(best_path),
        "final": str(final_path),
        "log": str(log_path),
        "best_val_ssim": best_ssim,
        "untouched_params_epoch1": untouched,
    }
