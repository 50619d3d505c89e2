"""Synthetic multi-metabolite brain phantoms.

Stands in for the private clinical dataset: each case is a 64 x 64 slice
with T1/FLAIR anatomy, 7 metabolite maps derived from the shared anatomy
(with tumor-specific contrast rules so metabolite identity is genuinely
informative), a quality mask and a tumor mask.  Cases serialize to one
directory each: raw little-endian float32 arrays plus a JSON manifest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from . import METABOLITES, TARGET_SIZE


@dataclass
class PhantomSpec:
    grid_size: int = TARGET_SIZE
    num_ellipses: int = 8
    tumor_probability: float = 0.6
    noise_sigma: float = 0.02
    seed: int = 0
    # per-metabolite contrast rules: (normal tissue gain, tumor multiplier,
    # smoothing sigma in pixels)
    metabolite_profiles: dict = field(default_factory=lambda: dict(_DEFAULT_PROFILES))

    def validate(self) -> None:
        if self.grid_size != TARGET_SIZE:
            raise ValueError(f"grid_size must be {TARGET_SIZE}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0.0 <= self.tumor_probability <= 1.0:
            raise ValueError("tumor_probability must be in [0, 1]")
        if self.num_ellipses < 1:
            raise ValueError("num_ellipses must be >= 1")
        if set(self.metabolite_profiles) != set(METABOLITES):
            raise ValueError("metabolite_profiles must cover exactly the 7 metabolites")


# (gain, tumor_mult, smooth_sigma): gain scales the tissue field, tumor_mult
# multiplies intensity inside the tumor, smooth_sigma gives each metabolite
# its own spatial character.  Gly/Gln strongly tumor-elevated, NAA suppressed.
_DEFAULT_PROFILES = {
    "tCho": (0.55, 1.9, 1.0),
    "tCr": (0.85, 1.0, 1.5),
    "NAA": (1.00, 0.15, 0.8),
    "Gly": (0.25, 4.0, 1.2),
    "Gln": (0.40, 2.8, 2.0),
    "Glu": (0.90, 0.55, 0.6),
    "Ins": (0.50, 1.5, 2.6),
}


@dataclass
class PhantomCase:
    case_id: str
    t1: np.ndarray
    flair: np.ndarray
    metabolite_maps: dict[str, np.ndarray]
    quality_mask: np.ndarray
    tumor_mask: np.ndarray

    def validate(self) -> None:
        shape = self.t1.shape
        if shape != (TARGET_SIZE, TARGET_SIZE):
            raise ValueError(f"bad field shape {shape}")
        if set(self.metabolite_maps) != set(METABOLITES):
            raise ValueError("metabolite maps must cover exactly the 7 metabolites")
        for name, arr in self.fields().items():
            if arr.shape != shape:
                raise ValueError(f"field {name} has shape {arr.shape}, expected {shape}")

    def fields(self) -> dict[str, np.ndarray]:
        out = {"t1": self.t1, "flair": self.flair}
        for m in METABOLITES:
            out[f"met_{m}"] = self.metabolite_maps[m]
        out["quality_mask"] = self.quality_mask
        out["tumor_mask"] = self.tumor_mask
        return out


def _ellipse_mask(N: int, cx, cy, a, b, theta) -> np.ndarray:
    y, x = np.mgrid[-1 : 1 : N * 1j, -1 : 1 : N * 1j]
    xs, ys = x - cx, y - cy
    ct, st = np.cos(theta), np.sin(theta)
    xr = ct * xs + st * ys
    yr = -st * xs + ct * ys
    return (xr / a) ** 2 + (yr / b) ** 2 <= 1.0


def _minmax(arr: np.ndarray) -> np.ndarray:
    lo, hi = float(arr.min()), float(arr.max())
    if hi - lo < 1e-12:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def generate_phantom(spec: PhantomSpec, case_index: int) -> PhantomCase:
    """Deterministically generate one phantom case from (seed, case_index)."""
    spec.validate()
    if case_index < 0:
        raise ValueError("case_index must be >= 0")
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, case_index)))
    N = spec.grid_size

    brain = _ellipse_mask(N, 0.0, 0.0, 0.88, 0.78, 0.0)

    # tissue field: superposition of random ellipses inside the brain
    tissue = np.zeros((N, N))
    n_ell = int(rng.integers(5, spec.num_ellipses + 5))
    for _ in range(n_ell):
        cx, cy = rng.uniform(-0.5, 0.5, size=2)
        a, b = rng.uniform(0.12, 0.45, size=2)
        theta = rng.uniform(0, np.pi)
        tissue += rng.uniform(0.2, 1.0) * _ellipse_mask(N, cx, cy, a, b, theta)
    tissue = gaussian_filter(tissue, 1.2)
    tissue = _minmax(tissue) * brain

    tumor_mask = np.zeros((N, N), dtype=bool)
    if rng.uniform() < spec.tumor_probability:
        cx, cy = rng.uniform(-0.4, 0.4, size=2)
        a, b = rng.uniform(0.12, 0.28, size=2)
        tumor_mask = _ellipse_mask(N, cx, cy, a, b, rng.uniform(0, np.pi)) & brain

    edema = gaussian_filter(tumor_mask.astype(float), 3.0)

    # anatomy: same tissue field under two different transfer curves
    t1 = 0.25 + 0.75 * tissue**1.5
    t1 = np.where(tumor_mask, 0.35 * t1 + 0.15, t1) * brain
    flair = 0.2 + 0.6 * np.sqrt(np.clip(tissue, 0, 1))
    flair = (flair + 1.2 * edema) * brain

    mets: dict[str, np.ndarray] = {}
    for name in METABOLITES:
        gain, tumor_mult, sigma = spec.metabolite_profiles[name]
        m = gain * (0.35 + 0.65 * tissue)
        m = np.where(tumor_mask, m * tumor_mult, m)
        if name == "Ins":  # rim/edema pattern rather than core enhancement
            m = m + 0.8 * edema * (~tumor_mask)
        m = gaussian_filter(m, sigma) * brain
        if spec.noise_sigma > 0:
            m = m + rng.normal(0, spec.noise_sigma, size=m.shape) * brain
        mets[name] = np.clip(_minmax(m), 0.0, 1.0)

    if spec.noise_sigma > 0:
        t1 = t1 + rng.normal(0, spec.noise_sigma, size=t1.shape) * brain
        flair = flair + rng.normal(0, spec.noise_sigma, size=flair.shape) * brain
    t1 = np.clip(_minmax(t1), 0.0, 1.0)
    flair = np.clip(_minmax(flair), 0.0, 1.0)

    # quality mask: brain interior minus a 2-pixel border band and a seeded
    # 5% random rejection, mimicking SNR/linewidth filtering
    border = np.zeros((N, N), dtype=bool)
    border[:2, :] = border[-2:, :] = True
    border[:, :2] = border[:, -2:] = True
    rejected = rng.uniform(size=(N, N)) < 0.05
    quality = brain & ~border & ~rejected

    case = PhantomCase(
        case_id=f"case_{case_index:04d}",
        t1=t1.astype(np.float64),
        flair=flair.astype(np.float64),
        metabolite_maps=mets,
        quality_mask=quality,
        tumor_mask=tumor_mask,
    )
    case.validate()
    return case


def augment(case: PhantomCase, rng: np.random.Generator) -> PhantomCase:
    """Random flip / 90-degree rotation / integer shift, applied identically
    to every field of the case (masks included).  Shifts zero-pad."""
    flip_h = bool(rng.integers(2))
    flip_v = bool(rng.integers(2))
    quarter_turns = int(rng.integers(4))
    shift = tuple(int(s) for s in rng.integers(-4, 5, size=2))
    return transform_case(case, flip_h, flip_v, quarter_turns, shift)


def transform_case(
    case: PhantomCase,
    flip_h: bool = False,
    flip_v: bool = False,
    quarter_turns: int = 0,
    shift: tuple[int, int] = (0, 0),
) -> PhantomCase:
    def tf(arr: np.ndarray) -> np.ndarray:
        out = arr
        if flip_h:
            out = out[:, ::-1]
        if flip_v:
            out = out[::-1, :]
        out = np.rot90(out, quarter_turns)
        if shift != (0, 0):
            shifted = np.zeros_like(out)
            dy, dx = shift
            src_y = slice(max(0, -dy), out.shape[0] - max(0, dy))
            src_x = slice(max(0, -dx), out.shape[1] - max(0, dx))
            dst_y = slice(max(0, dy), out.shape[0] - max(0, -dy))
            dst_x = slice(max(0, dx), out.shape[1] - max(0, -dx))
            shifted[dst_y, dst_x] = out[src_y, src_x]
            out = shifted
        return np.ascontiguousarray(out)

    return PhantomCase(
        case_id=case.case_id,
        t1=tf(case.t1),
        flair=tf(case.flair),
        metabolite_maps={m: tf(v) for m, v in case.metabolite_maps.items()},
        quality_mask=tf(case.quality_mask),
        tumor_mask=tf(case.tumor_mask),
    )


@dataclass
class SplitPlan:
    folds: list[dict[str, list[str]]]

    def to_json(self) -> str:
        return json.dumps({"folds": self.folds}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        return cls(folds=json.loads(text)["folds"])


def make_splits(case_ids: list[str], num_folds: int = 5, seed: int = 0) -> SplitPlan:
    """Cross-validation folds with train/val/test proportions close to 9:3:3.

    Every id appears in exactly one test set across folds; within a fold the
    three sets are disjoint and cover all ids.
    """
    if len(case_ids) < num_folds:
        raise ValueError(f"need at least {num_folds} case ids, got {len(case_ids)}")
    rng = np.random.default_rng(seed)
    order = [case_ids[i] for i in rng.permutation(len(case_ids))]
    test_chunks = [list(order[i::num_folds]) for i in range(num_folds)]

    folds = []
    for f in range(num_folds):
        test = test_chunks[f]
        rest = [cid for i, c in enumerate(test_chunks) if i != f for cid in c]
        # 9:3:3 over train+val -> val is 1/4 of the remainder
        n_val = max(1, round(len(rest) * 3 / 12))
        folds.append({"train": rest[n_val:], "val": rest[:n_val], "test": test})
    return SplitPlan(folds=folds)


# ---------------------------------------------------------------------------
# dataset serialization: one directory per case, float32 arrays + manifest

def save_case(case: PhantomCase, root: Path) -> Path:
    case_dir = Path(root) / case.case_id
    case_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"case_id": case.case_id, "fields": {}}
    for name, arr in case.fields().items():
        data = np.ascontiguousarray(arr, dtype="<f4")
        (case_dir / f"{name}.f32").write_bytes(data.tobytes())
        manifest["fields"][name] = {"shape": list(arr.shape), "dtype": "float32-le"}
    (case_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return case_dir


def load_case(case_dir: Path) -> PhantomCase:
    case_dir = Path(case_dir)
    manifest = json.loads((case_dir / "manifest.json").read_text())
    arrays = {}
    for name, meta in manifest["fields"].items():
        raw = (case_dir / f"{name}.f32").read_bytes()
        arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(meta["shape"]).astype(np.float64)
    case = PhantomCase(
        case_id=manifest["case_id"],
        t1=arrays["t1"],
        flair=arrays["flair"],
        metabolite_maps={m: arrays[f"met_{m}"] for m in METABOLITES},
        quality_mask=arrays["quality_mask"].astype(bool),
        tumor_mask=arrays["tumor_mask"].astype(bool),
    )
    case.validate()
    return case


def generate_dataset(spec: PhantomSpec, num_cases: int, out_dir: Path) -> list[str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = []
    for i in range(num_cases):
        case = generate_phantom(spec, i)
        save_case(case, out_dir)
        ids.append(case.case_id)
    meta = {"num_cases": num_cases, "seed": spec.seed, "spec": _spec_dict(spec)}
    (out_dir / "dataset.json").write_text(json.dumps(meta, indent=2))
    return ids


def _spec_dict(spec: PhantomSpec) -> dict:
    d = asdict(spec)
    d["metabolite_profiles"] = {k: list(v) for k, v in spec.metabolite_profiles.items()}
    return d


def list_case_ids(data_dir: Path) -> list[str]:
    data_dir = Path(data_dir)
    return sorted(p.name for p in data_dir.iterdir() if (p / "manifest.json").exists())
