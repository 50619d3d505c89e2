"""The conditioned super-resolution network.

A multi-encoder U-Net whose convolution blocks are modulated by three
conditions: the input resolution n (via filter scaling), the metabolite
identity (via a learned length-3 embedding concatenated to n), and the
adversarial-loss weight (via conditional instance normalization).  Ablation
variants swap the conditioning mechanism while keeping the backbone fixed.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from . import METABOLITES, TARGET_SIZE
from .kspace import center_window

VARIANTS = (
    "single_scale",
    "unconditioned",
    "am_layer",
    "hypernet",
    "filter_scaling",
    "filter_scaling_met",
)
CONDITIONED = ("am_layer", "hypernet", "filter_scaling", "filter_scaling_met")
EMBED_DIM = 3
KERNEL = 3
CIN_EPS = 1e-5


@dataclass
class ConditionTuple:
    n: int
    m: str
    lambda_adv: float

    def validate(self, N: int = TARGET_SIZE) -> None:
        if self.n % 2 != 0 or not 2 <= self.n <= N:
            raise ValueError(f"n must be an even integer in [2, {N}], got {self.n}")
        if self.m not in METABOLITES:
            raise ValueError(f"unknown metabolite {self.m!r}")
        if self.lambda_adv < 0:
            raise ValueError("lambda_adv must be >= 0")

    @property
    def m_index(self) -> int:
        return METABOLITES.index(self.m)


@dataclass
class NetConfig:
    channels: list[int] = field(default_factory=lambda: [8, 16, 32, 64, 128])
    variant: str = "filter_scaling_met"
    N: int = TARGET_SIZE
    num_encoders: int = 3

    def __post_init__(self):
        if len(self.channels) != 5:
            raise ValueError("exactly 5 feature levels required")
        if any(a >= b for a, b in zip(self.channels, self.channels[1:])):
            raise ValueError("channels must be strictly increasing")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def metabolite_aware(self) -> bool:
        return self.variant == "filter_scaling_met"

    def to_dict(self) -> dict:
        return {
            "channels": list(self.channels),
            "variant": self.variant,
            "N": self.N,
            "num_encoders": self.num_encoders,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        return cls(
            channels=list(d["channels"]),
            variant=d["variant"],
            N=int(d["N"]),
            num_encoders=int(d.get("num_encoders", 3)),
        )


def condition_vector(cond: ConditionTuple, metabolite_aware: bool, embed: nn.Embedding | None = None, N: int = TARGET_SIZE) -> torch.Tensor:
    """[n/N] or [n/N, E(m)]; lambda feeds the CIN net only, never this."""
    base = torch.tensor([cond.n / N], dtype=torch.float64)
    if not metabolite_aware:
        return base
    if embed is None:
        raise ValueError("metabolite-aware conditioning needs the embedding table")
    e = embed(torch.tensor(cond.m_index)).to(torch.float64)
    return torch.cat([base, e])


class CondMLP(nn.Module):
    """Shared fully-connected trunk with one linear output head per client
    layer; the trunk is evaluated once per batch and heads read from it."""

    def __init__(self, in_dim: int, hidden: int, depth: int):
        super().__init__()
        if depth < 2:
            raise ValueError("depth must be >= 2 (trunk + head)")
        layers: list[nn.Module] = [nn.Linear(in_dim, hidden), nn.ReLU()]
        for _ in range(depth - 2):
            layers += [nn.Linear(hidden, hidden), nn.ReLU()]
        self.trunk = nn.Sequential(*layers)
        self.heads = nn.ModuleList()

    def add_head(self, out_dim: int, bias_init: torch.Tensor | None = None) -> int:
        head = nn.Linear(self.trunk[-2].out_features, out_dim)
        with torch.no_grad():
            head.weight.zero_()
            if bias_init is None:
                head.bias.zero_()
            else:
                head.bias.copy_(bias_init)
        self.heads.append(head)
        return len(self.heads) - 1

    def trunk_features(self, cond: torch.Tensor) -> torch.Tensor:
        return self.trunk(cond)

    def head_out(self, feats: torch.Tensor, idx: int) -> torch.Tensor:
        return self.heads[idx](feats)


def filter_scaled_conv(x: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor | None, scale: torch.Tensor) -> torch.Tensor:
    """Convolution with per-filter scaled weights.

    weight is (C_out, C_in, k, k); scale is (C_in, C_out), one scalar per
    k x k filter; bias is left unscaled.
    """
    scaled = weight * scale.t()[:, :, None, None]
    return F.conv2d(x, scaled, bias, padding=KERNEL // 2)


def _per_sample_conv(x: torch.Tensor, weights: torch.Tensor, bias: torch.Tensor | None) -> torch.Tensor:
    """Grouped-conv trick: each batch element gets its own kernel bank."""
    b, c_in, h, w = x.shape
    c_out = weights.shape[1]
    out = F.conv2d(
        x.reshape(1, b * c_in, h, w),
        weights.reshape(b * c_out, c_in, KERNEL, KERNEL),
        padding=KERNEL // 2,
        groups=b,
    ).reshape(b, c_out, h, w)
    if bias is not None:
        out = out + bias.view(1, -1, 1, 1)
    return out


def instance_norm(x: torch.Tensor, scale: torch.Tensor | None = None, shift: torch.Tensor | None = None) -> torch.Tensor:
    """Per-sample, per-channel standardization with optional (B, C) affine."""
    mu = x.mean(dim=(2, 3), keepdim=True)
    var = x.var(dim=(2, 3), unbiased=False, keepdim=True)
    y = (x - mu) / torch.sqrt(var + CIN_EPS)
    if scale is not None:
        y = y * scale[:, :, None, None]
    if shift is not None:
        y = y + shift[:, :, None, None]
    return y


class MCMBlock(nn.Module):
    """Conv (optionally filter-scaled or hyper-predicted) -> conditional
    instance norm -> PReLU.  Heads on the shared conditioning trunks are
    registered at construction time."""

    def __init__(self, c_in: int, c_out: int, variant: str, c_net: CondMLP | None, s_net: CondMLP | None):
        super().__init__()
        self.c_in, self.c_out, self.variant = c_in, c_out, variant
        self.bias = nn.Parameter(torch.zeros(c_out))
        if variant == "hypernet":
            self.weight = None
            ref = torch.empty(c_out, c_in, KERNEL, KERNEL)
            nn.init.kaiming_uniform_(ref, a=math.sqrt(5))
            self.c_head = c_net.add_head(c_out * c_in * KERNEL * KERNEL, ref.flatten())
        else:
            self.weight = nn.Parameter(torch.empty(c_out, c_in, KERNEL, KERNEL))
            nn.init.kaiming_uniform_(self.weight, a=math.sqrt(5))
            if variant in ("filter_scaling", "filter_scaling_met"):
                self.c_head = c_net.add_head(c_in * c_out, torch.ones(c_in * c_out))
            elif variant == "am_layer":
                self.c_head = c_net.add_head(2 * c_out, torch.cat([torch.ones(c_out), torch.zeros(c_out)]))
            else:
                self.c_head = None
        if variant in CONDITIONED:
            self.s_head = s_net.add_head(2 * c_out, torch.cat([torch.ones(c_out), torch.zeros(c_out)]))
        else:
            self.s_head = None
        self.act = nn.PReLU(num_parameters=c_out)

    def forward(self, x: torch.Tensor, ctx: dict) -> torch.Tensor:
        c_net: CondMLP | None = ctx.get("c_net")
        s_net: CondMLP | None = ctx.get("s_net")
        if self.variant in ("filter_scaling", "filter_scaling_met"):
            scale = c_net.head_out(ctx["c_feat"], self.c_head).view(-1, self.c_in, self.c_out)
            weights = self.weight.unsqueeze(0) * scale.permute(0, 2, 1)[:, :, :, None, None]
            y = _per_sample_conv(x, weights, self.bias)
        elif self.variant == "hypernet":
            weights = c_net.head_out(ctx["c_feat"], self.c_head).view(-1, self.c_out, self.c_in, KERNEL, KERNEL)
            y = _per_sample_conv(x, weights, self.bias)
        else:
            y = F.conv2d(x, self.weight, self.bias, padding=KERNEL // 2)

        if self.s_head is not None:
            s_out = s_net.head_out(ctx["s_feat"], self.s_head)
            y = instance_norm(y, s_out[:, : self.c_out], s_out[:, self.c_out :])
        else:
            y = instance_norm(y)

        if self.variant == "am_layer":
            am = c_net.head_out(ctx["c_feat"], self.c_head)
            y = y * am[:, : self.c_out, None, None] + am[:, self.c_out :, None, None]
        return self.act(y)


class SRGenerator(nn.Module):
    """Multi-encoder U-Net: one encoder per input (low-res map, T1, FLAIR),
    channel-concat fusion per level, one decoder with skip connections, a
    plain final head and a global residual from the zero-filled input."""

    def __init__(self, config: NetConfig):
        super().__init__()
        self.config = config
        ch = config.channels
        variant = config.variant

        self.embed = nn.Embedding(len(METABOLITES), EMBED_DIM) if config.metabolite_aware else None
        if variant in ("filter_scaling", "am_layer", "hypernet"):
            self.c_net = CondMLP(1, 32, 5)
        elif variant == "filter_scaling_met":
            self.c_net = CondMLP(1 + EMBED_DIM, 64, 7)
        else:
            self.c_net = None
        self.s_net = CondMLP(1, 64, 5) if variant in CONDITIONED else None

        def block(c_in, c_out):
            return MCMBlock(c_in, c_out, variant, self.c_net, self.s_net)

        self.encoders = nn.ModuleList()
        for _ in range(config.num_encoders):
            levels = nn.ModuleList([block(1, ch[0])])
            for lvl in range(1, 5):
                levels.append(block(ch[lvl - 1], ch[lvl]))
            self.encoders.append(levels)

        self.fusers = nn.ModuleList([block(config.num_encoders * c, c) for c in ch])
        self.dec_up = nn.ModuleList([block(ch[l + 1], ch[l]) for l in range(4)])
        self.dec_merge = nn.ModuleList([block(2 * ch[l], ch[l]) for l in range(4)])
        self.head = nn.Conv2d(ch[0], 1, KERNEL, padding=KERNEL // 2)

    def _context(self, n: torch.Tensor, m_idx: torch.Tensor, lam: torch.Tensor) -> dict:
        ctx: dict = {"c_net": self.c_net, "s_net": self.s_net}
        if self.c_net is not None:
            cond = (n.to(self.head.weight.dtype) / self.config.N).unsqueeze(1)
            if self.config.metabolite_aware:
                cond = torch.cat([cond, self.embed(m_idx).to(cond.dtype)], dim=1)
            ctx["c_feat"] = self.c_net.trunk_features(cond)
        if self.s_net is not None:
            # lambda rescaled to [0, 1] so MLP inputs share the n/N range
            ctx["s_feat"] = self.s_net.trunk_features((lam.to(self.head.weight.dtype) * 10.0).unsqueeze(1))
        return ctx

    def forward(self, l_up: torch.Tensor, t1: torch.Tensor, flair: torch.Tensor, n: torch.Tensor, m_idx: torch.Tensor, lam: torch.Tensor) -> torch.Tensor:
        for name, t in (("l_up", l_up), ("t1", t1), ("flair", flair)):
            if t.ndim != 4 or t.shape[1] != 1 or t.shape[-1] != t.shape[-2]:
                raise ValueError(f"{name} must be (B, 1, H, H), got {tuple(t.shape)}")
        ctx = self._context(n, m_idx, lam)

        per_level: list[list[torch.Tensor]] = [[] for _ in range(5)]
        for enc, x in zip(self.encoders, (l_up, t1, flair)):
            h = x
            for lvl in range(5):
                if lvl > 0:
                    h = F.max_pool2d(h, 2)
                h = enc[lvl](h, ctx)
                per_level[lvl].append(h)

        fused = [self.fusers[lvl](torch.cat(per_level[lvl], dim=1), ctx) for lvl in range(5)]

        d = fused[4]
        for lvl in range(3, -1, -1):
            d = F.interpolate(d, scale_factor=2, mode="nearest")
            d = self.dec_up[lvl](d, ctx)
            d = self.dec_merge[lvl](torch.cat([d, fused[lvl]], dim=1), ctx)
        return l_up + self.head(d)


class Critic(nn.Module):
    """Wasserstein critic: four stride-2 convs then FC layers to a scalar."""

    def __init__(self, channels: tuple[int, ...] = (32, 64, 128, 256)):
        super().__init__()
        layers: list[nn.Module] = []
        c_prev = 1
        for c in channels:
            layers += [nn.Conv2d(c_prev, c, 4, stride=2, padding=1), nn.LeakyReLU(0.2)]
            c_prev = c
        self.features = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.fc = nn.Linear(c_prev, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != 1:
            raise ValueError(f"critic expects (B, 1, H, W), got {tuple(x.shape)}")
        return self.fc(self.pool(self.features(x)).flatten(1)).squeeze(1)


def count_params(config: NetConfig) -> int:
    return sum(p.numel() for p in SRGenerator(config).parameters() if p.requires_grad)


def mlp_param_count(in_dim: int, hidden: int, depth: int, head_dims: list[int]) -> int:
    """Closed-form parameter count of a CondMLP (trunk + heads)."""
    total = (in_dim + 1) * hidden + (depth - 2) * (hidden + 1) * hidden
    return total + sum((hidden + 1) * d for d in head_dims)


# ---------------------------------------------------------------------------
# data consistency (torch side, matching the numpy convention)

def _centered_fft2(x: torch.Tensor) -> torch.Tensor:
    return torch.fft.fftshift(torch.fft.fft2(torch.fft.ifftshift(x, dim=(-2, -1)), norm="ortho"), dim=(-2, -1))


def _centered_ifft2(k: torch.Tensor) -> torch.Tensor:
    return torch.fft.fftshift(torch.fft.ifft2(torch.fft.ifftshift(k, dim=(-2, -1)), norm="ortho"), dim=(-2, -1))


def torch_data_consistency(raw: torch.Tensor, measured: torch.Tensor) -> torch.Tensor:
    """Hard k-space replacement on a (B, 1, N, N) batch.

    measured is a (B, n, n) complex tensor holding the acquired centered
    window; the output's spectrum agrees with it exactly.
    """
    N = raw.shape[-1]
    n = measured.shape[-1]
    if n > N:
        raise ValueError(f"measured window {n} exceeds image size {N}")
    k = _centered_fft2(raw.to(torch.complex128) if raw.dtype == torch.float64 else raw.to(torch.complex64))
    w = center_window(N, n)
    k = k.clone()
    k[..., w, w] = measured.to(k.dtype).unsqueeze(1)
    if n < N:
        # mirror the window's edge band so the spectrum stays Hermitian
        # (same convention as kspace.embed_window)
        lo, hi = w.start, w.stop
        cols = torch.arange(lo, hi, device=raw.device)
        k[..., hi, (N - cols) % N] = torch.conj(k[..., lo, cols])
        k[..., (N - cols) % N, hi] = torch.conj(k[..., cols, lo])
    return _centered_ifft2(k).real.to(raw.dtype)


def torch_data_consistency_masked(raw: torch.Tensor, embedded: torch.Tensor, window_mask: torch.Tensor) -> torch.Tensor:
    """Per-sample data consistency for batches with mixed window sizes.

    embedded is (B, N, N) complex: each sample's measured window (plus its
    Hermitian mirror band) already placed on the full grid; window_mask is
    the (B, N, N) boolean set of positions to overwrite.  Equivalent to
    :func:`torch_data_consistency` sample by sample.
    """
    k = _centered_fft2(raw.to(torch.complex128) if raw.dtype == torch.float64 else raw.to(torch.complex64))
    mask = window_mask.unsqueeze(1)
    k = torch.where(mask, embedded.to(k.dtype).unsqueeze(1), k)
    return _centered_ifft2(k).real.to(raw.dtype)


# ---------------------------------------------------------------------------
# checkpoint archive: weights keyed by layer name + JSON header + checksum

def save_checkpoint(path: Path, generator: SRGenerator, header_extra: dict | None = None) -> None:
    buf = io.BytesIO()
    state = {k: v.detach().cpu().numpy() for k, v in generator.state_dict().items()}
    np.savez(buf, **state)
    weights_bytes = buf.getvalue()
    header = {
        "format": "mcmsr-checkpoint-v1",
        "config": generator.config.to_dict(),
        "weights_sha256": hashlib.sha256(weights_bytes).hexdigest(),
        "keys": sorted(state.keys()),
    }
    if header_extra:
        header.update(header_extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr("header.json", json.dumps(header, indent=2))
        zf.writestr("weights.npz", weights_bytes)


def load_checkpoint(path: Path) -> tuple[SRGenerator, dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with zipfile.ZipFile(path) as zf:
        header = json.loads(zf.read("header.json"))
        weights_bytes = zf.read("weights.npz")
    if header.get("format") != "mcmsr-checkpoint-v1":
        raise ValueError(f"unrecognized checkpoint format in {path}")
    digest = hashlib.sha256(weights_bytes).hexdigest()
    if digest != header["weights_sha256"]:
        raise ValueError(
            f"checkpoint weight checksum mismatch: header says {header['weights_sha256'][:12]}..., archive is {digest[:12]}..."
        )
    arrays = np.load(io.BytesIO(weights_bytes))
    config = NetConfig.from_dict(header["config"])
    gen = SRGenerator(config)
    state = {k: torch.from_numpy(arrays[k]) for k in arrays.files}
    gen.load_state_dict(state)
    gen.eval()
    return gen, header
