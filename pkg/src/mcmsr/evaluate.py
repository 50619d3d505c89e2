"""Comparative evaluation harness.

Runs the full comparison experiments at desk scale: the variant
comparison table, condition-match matrices, the lambda sweep strip and the
fidelity/sharpness trade-off curves, with Wilcoxon significance testing
between method pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch

from . import METABOLITES
from .losses import hf_energy, ms_ssim, psnr, ssim, wilcoxon_signed_rank
from .model import SRGenerator, load_checkpoint
from .phantom import PhantomCase, load_case
from .training import N_VALUES, _to_batch, build_sample, forward_sr

DEFAULT_LAMBDAS = (0.0, 0.03, 0.06, 0.09)


@dataclass
class EvalRecord:
    method: str
    fold: int
    case_id: str
    metabolite: str
    n: int
    lam: float
    psnr: float
    ssim: float
    ms_ssim: float
    hf_energy: float

    def key(self):
        return (self.fold, self.case_id, self.metabolite, self.n, self.lam)


def write_records(records: list[EvalRecord], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for r in records:
            fh.write(json.dumps(asdict(r)) + "\n")


def read_records(path: Path) -> list[EvalRecord]:
    records = []
    with Path(path).open() as fh:
        for line in fh:
            records.append(EvalRecord(**json.loads(line)))
    return records


@torch.no_grad()
def _run_cases(gen: SRGenerator, samples: list[dict], batch_size: int = 16) -> np.ndarray:
    outs = []
    for i in range(0, len(samples), batch_size):
        chunk = samples[i : i + batch_size]
        l_up, t1, flair, _gt, _mask, n, m_idx, lam, embedded, win = _to_batch(chunk, "cpu")
        sr = forward_sr(gen, l_up, t1, flair, n, m_idx, lam, embedded, win)
        outs.append(sr[:, 0].numpy().astype(np.float64))
    return np.concatenate(outs)


def _sample(case: PhantomCase, met: str, n: int, lam: float, cond_n: int | None = None, cond_m: str | None = None) -> dict:
    """One inference sample; cond_n/cond_m override the condition fed to the
    network while the input stays at the true (n, met)."""
    l_up, gt, mask, embedded, win = build_sample(case, met, n)
    return {
        "l_up": l_up, "gt": gt, "mask": mask, "embedded": embedded, "win": win,
        "t1": case.t1, "flair": case.flair,
        "n": cond_n if cond_n is not None else n,
        "m": cond_m if cond_m is not None else met,
        "lam": lam,
    }


def _score(sr: np.ndarray, sample: dict) -> dict:
    gt, mask = sample["gt"], sample["mask"]
    sr_m, gt_m = np.where(mask, sr, 0.0), np.where(mask, gt, 0.0)
    return {
        "psnr": float(psnr(sr_m, gt_m, mask)),
        "ssim": float(ssim(sr_m, gt_m, mask).item()),
        "ms_ssim": float(ms_ssim(sr_m, gt_m, mask).item()),
        "hf_energy": float(hf_energy(sr_m)),
    }


def evaluate_variant(
    ckpt_path: Path,
    data_dir: Path,
    case_ids: list[str],
    fold: int,
    n_list=N_VALUES,
    lambda_list=(0.0,),
    method: str | None = None,
) -> list[EvalRecord]:
    """Every case x metabolite x n x lambda, conditioned on the truth."""
    gen, header = load_checkpoint(ckpt_path)
    method = method or header["config"]["variant"]
    records = []
    for cid in case_ids:
        case = load_case(Path(data_dir) / cid)
        samples, meta = [], []
        for met in METABOLITES:
            for n in n_list:
                for lam in lambda_list:
                    samples.append(_sample(case, met, n, lam))
                    meta.append((met, n, lam))
        outs = _run_cases(gen, samples)
        for sr, sample, (met, n, lam) in zip(outs, samples, meta):
            records.append(EvalRecord(
                method=method, fold=fold, case_id=cid, metabolite=met,
                n=int(n), lam=float(lam), **_score(sr, sample),
            ))
    return records


def zero_fill_records(data_dir: Path, case_ids: list[str], fold: int, n_list=N_VALUES) -> list[EvalRecord]:
    """The classical zero-filling baseline as a pseudo-method."""
    records = []
    for cid in case_ids:
        case = load_case(Path(data_dir) / cid)
        for met in METABOLITES:
            for n in n_list:
                sample = _sample(case, met, n, 0.0)
                records.append(EvalRecord(
                    method="zero_fill", fold=fold, case_id=cid, metabolite=met,
                    n=int(n), lam=0.0, **_score(sample["l_up"], sample),
                ))
    return records


def summarize(records: list[EvalRecord]) -> dict:
    """Per-method mean and standard deviation, table-1 style."""
    by_method: dict[str, list[EvalRecord]] = {}
    for r in records:
        by_method.setdefault(r.method, []).append(r)
    out = {}
    for method, rs in sorted(by_method.items()):
        p = np.array([r.psnr for r in rs])
        s = np.array([r.ssim for r in rs])
        out[method] = {
            "psnr_mean": float(p.mean()), "psnr_std": float(p.std()),
            "ssim_mean": float(s.mean()), "ssim_std": float(s.std()),
            "count": len(rs),
        }
    return out


def compare_methods(records_a: list[EvalRecord], records_b: list[EvalRecord]) -> dict:
    """Wilcoxon signed-rank on PSNR and SSIM over key-aligned records."""
    a_by = {r.key(): r for r in records_a}
    b_by = {r.key(): r for r in records_b}
    if set(a_by) != set(b_by):
        only_a = list(set(a_by) - set(b_by))[:3]
        only_b = list(set(b_by) - set(a_by))[:3]
        raise ValueError(f"records are not paired; unmatched keys e.g. {only_a + only_b}")
    keys = sorted(a_by)
    psnr_a = [a_by[k].psnr for k in keys]
    psnr_b = [b_by[k].psnr for k in keys]
    ssim_a = [a_by[k].ssim for k in keys]
    ssim_b = [b_by[k].ssim for k in keys]
    result = {
        "method_a": records_a[0].method,
        "method_b": records_b[0].method,
        "pairs": len(keys),
        "summary": summarize(records_a + records_b),
    }
    for name, xs, ys in (("psnr", psnr_a, psnr_b), ("ssim", ssim_a, ssim_b)):
        diffs = np.array(ys) - np.array(xs)
        if np.all(diffs == 0):
            result[f"{name}_p"] = None
            result[f"{name}_note"] = "all differences zero; test degenerate"
        else:
            result[f"{name}_p"] = wilcoxon_signed_rank(xs, ys)
    return result


def condition_match_matrix(ckpt_path: Path, data_dir: Path, case_ids: list[str], axis: str, n_list=N_VALUES) -> dict:
    """Mean SSIM for every (true value, conditioned value) combination.

    axis="resolution" sweeps the n condition at fixed true n; "metabolite"
    sweeps the metabolite condition (needs the metabolite-aware variant).
    """
    gen, header = load_checkpoint(ckpt_path)
    variant = header["config"]["variant"]
    if axis == "metabolite" and variant != "filter_scaling_met":
        raise ValueError(f"metabolite axis needs filter_scaling_met, checkpoint is {variant}")
    if axis == "resolution" and variant in ("unconditioned", "single_scale"):
        raise ValueError(f"resolution axis needs a conditioned variant, checkpoint is {variant}")
    if axis == "resolution":
        values = list(n_list)
    elif axis == "metabolite":
        values = list(METABOLITES)
    else:
        raise ValueError(f"unknown axis {axis!r}")

    cells = {(tv, cv): [] for tv in values for cv in values}
    for cid in case_ids:
        case = load_case(Path(data_dir) / cid)
        samples, meta = [], []
        for true_val in values:
            for cond_val in values:
                if axis == "resolution":
                    for met in METABOLITES:
                        samples.append(_sample(case, met, true_val, 0.0, cond_n=cond_val))
                        meta.append((true_val, cond_val))
                else:
                    for n in n_list:
                        samples.append(_sample(case, true_val, n, 0.0, cond_m=cond_val))
                        meta.append((true_val, cond_val))
        outs = _run_cases(gen, samples)
        for sr, sample, (tv, cv) in zip(outs, samples, meta):
            cells[(tv, cv)].append(_score(sr, sample)["ssim"])
    matrix = [[float(np.mean(cells[(tv, cv)])) for cv in values] for tv in values]
    return {"axis": axis, "values": values, "matrix": matrix}


def diagonal_advantage(matrix: dict) -> dict:
    """Diagonal vs off-diagonal means, overall and per true value."""
    m = np.array(matrix["matrix"])
    k = len(m)
    diag = float(np.mean(np.diag(m)))
    off = float((m.sum() - np.trace(m)) / (k * (k - 1)))
    per_value = {}
    for i, v in enumerate(matrix["values"]):
        row_off = (m[i].sum() - m[i, i]) / (k - 1)
        per_value[str(v)] = {"diag": float(m[i, i]), "off_mean": float(row_off), "wins": bool(m[i, i] >= row_off)}
    return {"diag_mean": diag, "off_mean": off, "per_value": per_value}


def lambda_sweep(ckpt_path: Path, data_dir: Path, case_id: str, met: str, n: int, lambda_list=DEFAULT_LAMBDAS, out_png: Path | None = None) -> dict:
    """Zero-fill baseline, outputs across the lambda grid, ground truth,
    each annotated with PSNR/SSIM/high-frequency energy."""
    gen, _ = load_checkpoint(ckpt_path)
    case = load_case(Path(data_dir) / case_id)
    samples = [_sample(case, met, n, lam) for lam in lambda_list]
    outs = _run_cases(gen, samples)
    base = samples[0]
    panels = [{"label": "zero_fill", "image": base["l_up"], **_score(base["l_up"], base)}]
    for lam, sr, sample in zip(lambda_list, outs, samples):
        panels.append({"label": f"lambda={lam:g}", "image": sr, **_score(sr, sample)})
    gt = base["gt"]
    panels.append({
        "label": "ground_truth", "image": gt,
        "psnr": 100.0, "ssim": 1.0, "ms_ssim": 1.0,
        "hf_energy": float(hf_energy(np.where(base["mask"], gt, 0.0))),
    })
    if out_png is not None:
        _render_strip(panels, out_png)
    metrics = [{k: p[k] for k in ("label", "psnr", "ssim", "ms_ssim", "hf_energy")} for p in panels]
    return {"case_id": case_id, "metabolite": met, "n": n, "lambdas": list(lambda_list), "panels": metrics}


def _render_strip(panels: list[dict], out_png: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, len(panels), figsize=(2.2 * len(panels), 2.8))
    for ax, p in zip(np.atleast_1d(axes), panels):
        ax.imshow(p["image"], cmap="magma", vmin=0, vmax=1)
        ax.set_title(p["label"], fontsize=8)
        ax.set_xlabel(f"{p['psnr']:.1f}/{p['ssim']:.3f}/{p['hf_energy']:.3f}", fontsize=7)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    out_png = Path(out_png)
    out_png.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_png, dpi=120)
    plt.close(fig)


def tradeoff_curves(records: list[EvalRecord], out_json: Path | None = None, out_png: Path | None = None) -> dict:
    """Mean PSNR/SSIM/high-frequency energy as functions of lambda."""
    lambdas = sorted({r.lam for r in records})
    if len(lambdas) < 3:
        raise ValueError(f"need records at >= 3 lambda values, got {lambdas}")
    curves = {"lambda": lambdas, "psnr": [], "ssim": [], "hf_energy": []}
    for lam in lambdas:
        rs = [r for r in records if r.lam == lam]
        curves["psnr"].append(float(np.mean([r.psnr for r in rs])))
        curves["ssim"].append(float(np.mean([r.ssim for r in rs])))
        curves["hf_energy"].append(float(np.mean([r.hf_energy for r in rs])))
    if out_json is not None:
        Path(out_json).parent.mkdir(parents=True, exist_ok=True)
        Path(out_json).write_text(json.dumps(curves, indent=2))
    if out_png is not None:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, axes = plt.subplots(1, 3, figsize=(10, 3))
        for ax, key in zip(axes, ("psnr", "ssim", "hf_energy")):
            ax.plot(curves["lambda"], curves[key], marker="o")
            ax.set_xlabel("lambda")
            ax.set_ylabel(key)
        fig.tight_layout()
        Path(out_png).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out_png, dpi=120)
        plt.close(fig)
    return curves
