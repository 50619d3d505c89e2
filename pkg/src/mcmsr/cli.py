"""Command-line entry point.

One `mcmsr` executable with sub-commands for phantom generation, split
planning, training, the four evaluation studies, serving, and one-shot
inference.
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import METABOLITES


@click.group()
def main():
    """Multi-conditional metabolic-map super-resolution toolkit."""


@main.group()
def phantom():
    """Synthetic phantom dataset utilities."""


@phantom.command("generate")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--cases", type=int, default=15, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--tumor-prob", type=float, default=0.7, show_default=True)
@click.option("--noise", "noise_sigma", type=float, default=0.01, show_default=True)
def phantom_generate(out_dir, cases, seed, tumor_prob, noise_sigma):
    """Generate a phantom dataset of CASES anatomies."""
    from .phantom import PhantomSpec, generate_dataset

    spec = PhantomSpec(seed=seed, tumor_probability=tumor_prob, noise_sigma=noise_sigma)
    ids = generate_dataset(spec, cases, out_dir)
    click.echo(f"wrote {len(ids)} cases to {out_dir}")


@phantom.command("splits")
@click.option("--dir", "data_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def phantom_splits(data_dir, folds, seed, out_path):
    """Write a cross-validation split plan for an existing dataset."""
    from .phantom import list_case_ids, make_splits

    ids = list_case_ids(data_dir)
    plan = make_splits(ids, num_folds=folds, seed=seed)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(plan.to_json())
    sizes = [{k: len(v) for k, v in fold.items()} for fold in plan.folds]
    click.echo(f"wrote {folds} folds to {out_path}: {sizes}")


def _load_fold(splits_path: Path, fold: int) -> dict:
    from .phantom import SplitPlan

    plan = SplitPlan.from_json(Path(splits_path).read_text())
    if not 0 <= fold < len(plan.folds):
        raise click.BadParameter(f"fold {fold} outside [0, {len(plan.folds) - 1}]")
    return plan.folds[fold]


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--splits", "splits_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--fold", type=int, default=0, show_default=True)
@click.option("--variant", type=click.Choice(["single_scale", "unconditioned", "am_layer", "hypernet", "filter_scaling", "filter_scaling_met"]), default="filter_scaling", show_default=True)
@click.option("--preset", type=click.Choice(["desk", "full"]), default="desk", show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--epochs", type=int, default=None, help="override the preset's epoch count")
@click.option("--fixed-n", type=int, default=None, help="single_scale only: the one training resolution")
@click.option("--adversarial/--no-adversarial", default=False, show_default=True)
def train(data_dir, splits_path, fold, variant, preset, out_dir, seed, epochs, fixed_n, adversarial):
    """Train one variant on one fold."""
    from .training import desk_preset, full_preset
    from .training import train as run_train

    overrides = {"seed": seed, "adversarial": adversarial}
    if epochs is not None:
        overrides["epochs"] = epochs
    if fixed_n is not None:
        overrides["fixed_n"] = fixed_n
    make = desk_preset if preset == "desk" else full_preset
    config = make(variant, **overrides)
    split = _load_fold(splits_path, fold)
    result = run_train(data_dir, split, config, out_dir)
    click.echo(json.dumps({k: result[k] for k in ("best", "final", "log", "best_val_ssim")}, indent=2))


@main.group("eval")
def eval_group():
    """Comparative evaluation studies."""


def _test_ids(splits_path: Path, fold: int) -> list[str]:
    return _load_fold(splits_path, fold)["test"]


@eval_group.command("table1")
@click.option("--ckpt-dir", type=click.Path(exists=True, path_type=Path), required=True, help="directory of *_best.ckpt files, one per variant")
@click.option("--data", "data_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--splits", "splits_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--fold", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def eval_table1(ckpt_dir, data_dir, splits_path, fold, out_dir):
    """Variant comparison table with zero-fill baseline and Wilcoxon tests."""
    from .evaluate import compare_methods, evaluate_variant, summarize, write_records, zero_fill_records

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = _test_ids(splits_path, fold)
    ckpts = sorted(Path(ckpt_dir).glob("*_best.ckpt"))
    if not ckpts:
        raise click.ClickException(f"no *_best.ckpt files in {ckpt_dir}")
    by_method = {"zero_fill": zero_fill_records(data_dir, ids, fold)}
    for ckpt in ckpts:
        records = evaluate_variant(ckpt, data_dir, ids, fold)
        by_method[records[0].method] = records
    all_records = [r for rs in by_method.values() for r in rs]
    write_records(all_records, out_dir / "table1_records.jsonl")
    table = summarize(all_records)
    tests = {}
    methods = sorted(by_method)
    for a in methods:
        for b in methods:
            if a < b:
                tests[f"{a}_vs_{b}"] = {
                    k: v for k, v in compare_methods(by_method[a], by_method[b]).items() if k != "summary"
                }
    payload = {"fold": fold, "table": table, "wilcoxon": tests}
    (out_dir / "table1.json").write_text(json.dumps(payload, indent=2))
    click.echo(json.dumps(table, indent=2))


@eval_group.command("fig2")
@click.option("--ckpt", "ckpt_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--splits", "splits_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--fold", type=int, default=0, show_default=True)
@click.option("--axis", type=click.Choice(["resolution", "metabolite"]), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def eval_fig2(ckpt_path, data_dir, splits_path, fold, axis, out_dir):
    """Condition-match matrix: truth vs conditioning along one axis."""
    from .evaluate import condition_match_matrix, diagonal_advantage

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = _test_ids(splits_path, fold)
    matrix = condition_match_matrix(ckpt_path, data_dir, ids, axis)
    advantage = diagonal_advantage(matrix)
    payload = {**matrix, "advantage": advantage}
    (out_dir / f"fig2_{axis}.json").write_text(json.dumps(payload, indent=2))
    click.echo(json.dumps(advantage, indent=2))


@eval_group.command("fig3")
@click.option("--ckpt", "ckpt_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--case", "case_id", required=True)
@click.option("--metabolite", type=click.Choice(list(METABOLITES)), default="Gly", show_default=True)
@click.option("--n", type=int, default=16, show_default=True)
@click.option("--lambdas", default="0,0.03,0.06,0.09", show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def eval_fig3(ckpt_path, data_dir, case_id, metabolite, n, lambdas, out_dir):
    """Lambda sweep strip for one case."""
    from .evaluate import lambda_sweep

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lambda_list = tuple(float(x) for x in lambdas.split(","))
    result = lambda_sweep(ckpt_path, data_dir, case_id, metabolite, n, lambda_list, out_png=out_dir / "fig3_strip.png")
    (out_dir / "fig3.json").write_text(json.dumps(result, indent=2))
    click.echo(json.dumps(result["panels"], indent=2))


@eval_group.command("fig4")
@click.option("--ckpt", "ckpt_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--splits", "splits_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--fold", type=int, default=0, show_default=True)
@click.option("--lambdas", default="0,0.02,0.04,0.06,0.08,0.1", show_default=True)
@click.option("--n-list", default="16,24,32", show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def eval_fig4(ckpt_path, data_dir, splits_path, fold, lambdas, n_list, out_dir):
    """Fidelity/sharpness trade-off curves over a lambda grid."""
    from .evaluate import evaluate_variant, tradeoff_curves, write_records

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = _test_ids(splits_path, fold)
    lambda_list = tuple(float(x) for x in lambdas.split(","))
    ns = tuple(int(x) for x in n_list.split(","))
    records = evaluate_variant(ckpt_path, data_dir, ids, fold, n_list=ns, lambda_list=lambda_list)
    write_records(records, out_dir / "fig4_records.jsonl")
    curves = tradeoff_curves(records, out_json=out_dir / "fig4.json", out_png=out_dir / "fig4.png")
    click.echo(json.dumps(curves, indent=2))


@main.command()
@click.option("--ckpt", "ckpt_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(ckpt_path, data_dir, host, port):
    """Serve the inference HTTP API."""
    from .service import serve as run_serve

    run_serve(ckpt_path, data_dir, host=host, port=port)


@main.command()
@click.option("--ckpt", "ckpt_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--case", "case_id", required=True)
@click.option("--n", type=int, default=16, show_default=True)
@click.option("--metabolite", type=click.Choice(list(METABOLITES)), default="Gly", show_default=True)
@click.option("--lambda", "lambda_adv", type=float, default=0.0, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def infer(ckpt_path, data_dir, case_id, n, metabolite, lambda_adv, out_path):
    """One-shot inference: write the SR image as PNG and print metrics."""
    import base64

    from .service import InferRequest, _prepare_sample, _infer_images, _validate_condition, load_model, encode_png, metric_dict
    import numpy as np

    handle = load_model(ckpt_path)
    warnings = _validate_condition(n, metabolite, lambda_adv)
    sample, _case = _prepare_sample(Path(data_dir), case_id, None, n, metabolite, lambda_adv)
    sr = _infer_images(handle, [sample])[0]
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(base64.b64decode(encode_png(sr)))
    mask = sample["mask"]
    metrics = metric_dict(np.where(mask, sr, 0.0), np.where(mask, sample["gt"], 0.0), mask)
    click.echo(json.dumps({"out": str(out_path), "metrics": metrics, "warnings": warnings}, indent=2))


if __name__ == "__main__":
    main()
