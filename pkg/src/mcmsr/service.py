"""HTTP inference service.

Exposes a loaded checkpoint over a small JSON API: catalog endpoints for
cases and metabolites, single inference, and a lambda-grid sweep endpoint
sized for interactive slider scrubbing.  Images travel both as base64 PNG
previews and as base64 little-endian float32 arrays so clients can display
without losing metric fidelity.
"""

from __future__ import annotations

import base64
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import METABOLITES, TARGET_SIZE
from dataclasses import asdict as _dc_asdict

from .losses import metric_report as _metric_report


def metric_dict(s: np.ndarray, i: np.ndarray, mask: np.ndarray) -> dict:
    return _dc_asdict(_metric_report(s, i, mask))
from .model import ConditionTuple, SRGenerator, load_checkpoint
from .phantom import list_case_ids, load_case
from .training import N_VALUES, _to_batch, build_sample, forward_sr

MAX_SWEEP = 8
LAMBDA_TRAIN_RANGE = (0.0, 0.1)


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass(frozen=True)
class ModelHandle:
    """Immutable pairing of a generator in eval mode and its header."""

    generator: SRGenerator
    header: dict

    @property
    def variant(self) -> str:
        return self.header["config"]["variant"]


def load_model(ckpt_path: Path) -> ModelHandle:
    gen, header = load_checkpoint(ckpt_path)
    gen.eval()
    for p in gen.parameters():
        p.requires_grad_(False)
    return ModelHandle(generator=gen, header=header)


def encode_png(image: np.ndarray) -> str:
    """Grayscale PNG of a [0, 1] field, base64-encoded."""
    from PIL import Image

    arr = np.clip(image, 0.0, 1.0)
    img = Image.fromarray((arr * 255).round().astype(np.uint8), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def encode_floats(image: np.ndarray) -> str:
    return base64.b64encode(np.asarray(image, dtype="<f4").tobytes()).decode("ascii")


def decode_floats(payload: str, shape: tuple[int, int]) -> np.ndarray:
    data = np.frombuffer(base64.b64decode(payload), dtype="<f4")
    if data.size != shape[0] * shape[1]:
        raise ServiceError(422, "bad_payload", f"expected {shape[0] * shape[1]} floats, got {data.size}")
    return data.reshape(shape).astype(np.float64)


def _image_body(image: np.ndarray) -> dict:
    return {"png_base64": encode_png(image), "raw_float32_base64": encode_floats(image), "shape": list(image.shape)}


class InferRequest(BaseModel):
    case_id: str | None = None
    inline_low_res_base64: str | None = None  # full-grid zero-filled image
    n: int
    metabolite: str
    lambda_adv: float = 0.0
    include_baseline: bool = False
    include_ground_truth: bool = False
    self_check: bool = False


class SweepRequest(BaseModel):
    case_id: str
    n: int
    metabolite: str
    lambdas: list[float]
    include_baseline: bool = True
    include_ground_truth: bool = True


def _validate_condition(n: int, metabolite: str, lam: float) -> list[str]:
    if n % 2 != 0 or not 2 <= n <= TARGET_SIZE:
        raise ServiceError(422, "bad_argument", f"n must be an even integer in [2, {TARGET_SIZE}], got {n}")
    if metabolite not in METABOLITES:
        raise ServiceError(422, "bad_argument", f"unknown metabolite {metabolite!r}; choose from {list(METABOLITES)}")
    warnings = []
    if not LAMBDA_TRAIN_RANGE[0] <= lam <= LAMBDA_TRAIN_RANGE[1]:
        warnings.append(f"lambda {lam:g} outside training range {list(LAMBDA_TRAIN_RANGE)}; extrapolating")
    if not N_VALUES[0] <= n <= N_VALUES[-1]:
        warnings.append(f"n {n} outside training range [{N_VALUES[0]}, {N_VALUES[-1]}]; extrapolating")
    return warnings


@torch.no_grad()
def _infer_images(handle: ModelHandle, samples: list[dict]) -> np.ndarray:
    batch = _to_batch(samples, "cpu")
    l_up, t1, flair, _gt, _mask, n, m_idx, lam, embedded, win = batch
    sr = forward_sr(handle.generator, l_up, t1, flair, n, m_idx, lam, embedded, win)
    return sr[:, 0].numpy().astype(np.float64)


def _dc_self_check(sr: np.ndarray, sample: dict) -> dict:
    """Relative k-space error inside the measured window."""
    from .kspace import forward_dft

    k = forward_dft(sr).values
    win = sample["win"]
    measured = sample["embedded"]
    num = float(np.linalg.norm((k - measured)[win]))
    den = float(np.linalg.norm(measured[win])) or 1.0
    rel = num / den
    return {"window_rel_error": rel, "ok": bool(rel < 1e-4)}


def _prepare_sample(data_dir: Path, req_case: str | None, inline: str | None, n: int, metabolite: str, lam: float):
    """Returns (sample dict, case-or-None).  Inline payloads carry a
    full-grid image that is re-degraded to n to define the measurement."""
    from .kspace import embed_window, kspace_truncate, window_mask, zero_fill_upsample

    if (req_case is None) == (inline is None):
        raise ServiceError(422, "bad_argument", "provide exactly one of case_id or inline_low_res_base64")
    if req_case is not None:
        case_path = data_dir / req_case
        if not (case_path / "manifest.json").exists():
            raise ServiceError(404, "case_not_found", f"no case {req_case!r} under {data_dir}")
        case = load_case(case_path)
        l_up, gt, mask, embedded, win = build_sample(case, metabolite, n)
        return {
            "l_up": l_up, "gt": gt, "mask": mask, "embedded": embedded, "win": win,
            "t1": case.t1, "flair": case.flair, "n": n, "m": metabolite, "lam": lam,
        }, case
    image = decode_floats(inline, (TARGET_SIZE, TARGET_SIZE))
    measured = kspace_truncate(image, n)
    l_up = zero_fill_upsample(measured, TARGET_SIZE)
    zeros = np.zeros_like(l_up)
    ones = np.ones_like(l_up, dtype=bool)
    return {
        "l_up": l_up, "gt": zeros, "mask": ones,
        "embedded": embed_window(measured.values, TARGET_SIZE),
        "win": window_mask(TARGET_SIZE, n),
        "t1": zeros, "flair": zeros, "n": n, "m": metabolite, "lam": lam,
    }, None


def create_app(handle: ModelHandle, data_dir: Path) -> FastAPI:
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise ValueError(f"data directory {data_dir} does not exist")
    app = FastAPI(title="mcmsr inference service")

    @app.exception_handler(ServiceError)
    async def _service_error(_request, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "variant": handle.variant,
            "channels": handle.header["config"]["channels"],
            "target_size": TARGET_SIZE,
        }

    @app.get("/metabolites")
    def metabolites():
        return {"metabolites": list(METABOLITES)}

    @app.get("/cases")
    def cases():
        entries = []
        for cid in list_case_ids(data_dir):
            try:
                case = load_case(data_dir / cid)
            except (OSError, ValueError, KeyError):
                continue
            entries.append({
                "case_id": cid,
                "metabolites": sorted(case.metabolite_maps),
                "has_ground_truth": True,
            })
        return {"cases": entries}

    def _single(req: InferRequest) -> dict:
        warnings = _validate_condition(req.n, req.metabolite, req.lambda_adv)
        sample, case = _prepare_sample(
            data_dir, req.case_id, req.inline_low_res_base64, req.n, req.metabolite, req.lambda_adv
        )
        sr = _infer_images(handle, [sample])[0]
        body = {
            "sr_image": _image_body(sr),
            "condition_echo": {"n": req.n, "metabolite": req.metabolite, "lambda": req.lambda_adv},
            "warnings": warnings,
        }
        if req.include_baseline:
            body["baseline_image"] = _image_body(sample["l_up"])
        if case is not None:
            gt, mask = sample["gt"], sample["mask"]
            body["metrics"] = metric_dict(np.where(mask, sr, 0.0), np.where(mask, gt, 0.0), mask)
            if req.include_ground_truth:
                body["gt_image"] = _image_body(gt)
        elif req.include_ground_truth:
            warnings.append("ground truth unavailable for inline payloads")
        if req.self_check:
            body["self_check"] = _dc_self_check(sr, sample)
        return body

    @app.post("/infer")
    def infer(req: InferRequest):
        return _single(req)

    @app.post("/infer/sweep")
    def infer_sweep(req: SweepRequest):
        if not 1 <= len(req.lambdas) <= MAX_SWEEP:
            raise ServiceError(422, "bad_argument", f"sweep accepts 1..{MAX_SWEEP} lambda values, got {len(req.lambdas)}")
        warnings = []
        samples = []
        for lam in req.lambdas:
            warnings.extend(w for w in _validate_condition(req.n, req.metabolite, lam) if w not in warnings)
            sample, _case = _prepare_sample(data_dir, req.case_id, None, req.n, req.metabolite, lam)
            samples.append(sample)
        # one sample per forward pass so each column is bitwise identical to
        # the equivalent single /infer call (batching changes conv kernels)
        outs = np.stack([_infer_images(handle, [s])[0] for s in samples])
        gt, mask = samples[0]["gt"], samples[0]["mask"]
        results = []
        for lam, sr in zip(req.lambdas, outs):
            results.append({
                "lambda": lam,
                "sr_image": _image_body(sr),
                "metrics": metric_dict(np.where(mask, sr, 0.0), np.where(mask, gt, 0.0), mask),
            })
        body = {
            "case_id": req.case_id,
            "n": req.n,
            "metabolite": req.metabolite,
            "results": results,
            "warnings": warnings,
        }
        if req.include_baseline:
            l_up = samples[0]["l_up"]
            body["baseline_image"] = _image_body(l_up)
            body["baseline_metrics"] = metric_dict(np.where(mask, l_up, 0.0), np.where(mask, gt, 0.0), mask)
        if req.include_ground_truth:
            body["gt_image"] = _image_body(gt)
        return body

    return app


def serve(ckpt_path: Path, data_dir: Path, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    app = create_app(load_model(ckpt_path), data_dir)
    uvicorn.run(app, host=host, port=port)
