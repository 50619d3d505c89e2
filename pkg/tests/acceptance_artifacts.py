"""Builds (once) and locates the trained artifacts the acceptance suite uses.

Everything lands in an on-disk cache so the expensive desk-scale training
runs happen at most once per checkout; re-running the suite reuses them.
The same entry point doubles as a command line pre-warmer:

    python3 tests/acceptance_artifacts.py
"""

from __future__ import annotations

import json
from pathlib import Path

CACHE_ROOT = Path(__file__).resolve().parent.parent / ".cache" / "acceptance"
NUM_CASES = 64
SEED = 0
FOLD = 0
EPOCHS = 20
SINGLE_SCALE_NS = (16, 24, 32)

# tag -> (variant, extra TrainConfig overrides)
RUNS = {
    "fs": ("filter_scaling", {}),
    "fs_met": ("filter_scaling_met", {}),
    "fs_adv": ("filter_scaling", {"adversarial": True}),
    **{f"ss{n}": ("single_scale", {"fixed_n": n, "val_n_values": (n,)}) for n in SINGLE_SCALE_NS},
}


def data_dir() -> Path:
    return CACHE_ROOT / "data"


def splits_path() -> Path:
    return CACHE_ROOT / "splits.json"


def run_dir() -> Path:
    return CACHE_ROOT / "runs"


def checkpoint(tag: str) -> Path:
    return run_dir() / f"{tag}_best.ckpt"


def result_path(tag: str) -> Path:
    return run_dir() / f"{tag}_result.json"


def ensure_dataset() -> None:
    from mcmsr.phantom import PhantomSpec, generate_dataset, list_case_ids, make_splits

    if not (data_dir() / "dataset.json").exists():
        generate_dataset(PhantomSpec(seed=SEED), NUM_CASES, data_dir())
    if not splits_path().exists():
        plan = make_splits(list_case_ids(data_dir()), num_folds=5, seed=SEED)
        splits_path().parent.mkdir(parents=True, exist_ok=True)
        splits_path().write_text(plan.to_json())


def fold_split() -> dict:
    from mcmsr.phantom import SplitPlan

    return SplitPlan.from_json(splits_path().read_text()).folds[FOLD]


def ensure_run(tag: str) -> Path:
    from mcmsr.training import desk_preset, train

    if checkpoint(tag).exists() and result_path(tag).exists():
        return checkpoint(tag)
    ensure_dataset()
    variant, overrides = RUNS[tag]
    config = desk_preset(variant, epochs=EPOCHS, seed=SEED, **overrides)
    result = train(data_dir(), fold_split(), config, run_dir(), tag=tag)
    result_path(tag).write_text(json.dumps(result, indent=2))
    return checkpoint(tag)


def ensure_all() -> dict[str, Path]:
    ensure_dataset()
    return {tag: ensure_run(tag) for tag in RUNS}


if __name__ == "__main__":
    import time

    for tag in RUNS:
        t0 = time.time()
        path = ensure_run(tag)
        best = json.loads(result_path(tag).read_text())["best_val_ssim"]
        print(f"{tag}: {path} best_val_ssim={best:.4f} ({time.time() - t0:.0f}s)", flush=True)
