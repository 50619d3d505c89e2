"""CLI plumbing with click's runner: every sub-command end to end at tiny
scale, checking emitted artifacts rather than model quality."""

from __future__ import annotations

import json

import pytest
import torch
from click.testing import CliRunner

from mcmsr.cli import main
from mcmsr.model import NetConfig, SRGenerator, save_checkpoint

from conftest import TINY_CHANNELS


@pytest.fixture()
def runner():
    return CliRunner()


def _invoke(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


def test_phantom_generate_and_splits(runner, tmp_path):
    data = tmp_path / "data"
    _invoke(runner, ["phantom", "generate", "--out", str(data), "--cases", "5", "--seed", "3"])
    assert (data / "dataset.json").exists()
    assert len(list(data.glob("case_*/manifest.json"))) == 5
    splits = tmp_path / "splits.json"
    _invoke(runner, ["phantom", "splits", "--dir", str(data), "--folds", "5", "--seed", "3", "--out", str(splits)])
    plan = json.loads(splits.read_text())
    assert len(plan["folds"]) == 5
    fold = plan["folds"][0]
    assert set(fold) == {"train", "val", "test"}
    assert sorted(fold["train"] + fold["val"] + fold["test"]) == sorted(p.parent.name for p in data.glob("case_*/manifest.json"))


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory):
    """Dataset + splits + one 1-epoch checkpoint, shared by the slow tests."""
    root = tmp_path_factory.mktemp("cliws")
    runner = CliRunner()
    data, splits, ckpts = root / "data", root / "splits.json", root / "ckpts"
    for args in (
        ["phantom", "generate", "--out", str(data), "--cases", "5", "--seed", "3"],
        ["phantom", "splits", "--dir", str(data), "--folds", "5", "--seed", "3", "--out", str(splits)],
    ):
        result = runner.invoke(main, args, catch_exceptions=False)
        assert result.exit_code == 0, result.output
    # a tiny trained checkpoint via the CLI, plus an untrained met variant
    result = runner.invoke(main, [
        "train", "--data", str(data), "--splits", str(splits), "--fold", "0",
        "--variant", "filter_scaling", "--preset", "desk", "--epochs", "1",
        "--out", str(ckpts), "--seed", "0",
    ], catch_exceptions=False)
    assert result.exit_code == 0, result.output
    torch.manual_seed(0)
    met = SRGenerator(NetConfig(channels=list(TINY_CHANNELS), variant="filter_scaling_met"))
    save_checkpoint(ckpts / "filter_scaling_met_best.ckpt", met, {"val_ssim": 0.0})
    return {"root": root, "data": data, "splits": splits, "ckpts": ckpts}


def test_train_output(cli_workspace):
    ckpts = cli_workspace["ckpts"]
    assert (ckpts / "filter_scaling_best.ckpt").exists()
    assert (ckpts / "filter_scaling_final.ckpt").exists()
    assert (ckpts / "filter_scaling_log.jsonl").exists()


def test_eval_table1(runner, cli_workspace):
    out = cli_workspace["root"] / "table1"
    result = _invoke(runner, [
        "eval", "table1", "--ckpt-dir", str(cli_workspace["ckpts"]),
        "--data", str(cli_workspace["data"]), "--splits", str(cli_workspace["splits"]),
        "--fold", "0", "--out", str(out),
    ])
    payload = json.loads((out / "table1.json").read_text())
    assert set(payload["table"]) == {"zero_fill", "filter_scaling", "filter_scaling_met"}
    assert (out / "table1_records.jsonl").exists()
    assert any("zero_fill" in k for k in payload["wilcoxon"])
    assert "zero_fill" in result.output


def test_eval_fig2_both_axes(runner, cli_workspace):
    out = cli_workspace["root"] / "fig2"
    _invoke(runner, [
        "eval", "fig2", "--ckpt", str(cli_workspace["ckpts"] / "filter_scaling_best.ckpt"),
        "--data", str(cli_workspace["data"]), "--splits", str(cli_workspace["splits"]),
        "--axis", "resolution", "--out", str(out),
    ])
    payload = json.loads((out / "fig2_resolution.json").read_text())
    assert len(payload["matrix"]) == len(payload["values"]) == 9
    _invoke(runner, [
        "eval", "fig2", "--ckpt", str(cli_workspace["ckpts"] / "filter_scaling_met_best.ckpt"),
        "--data", str(cli_workspace["data"]), "--splits", str(cli_workspace["splits"]),
        "--axis", "metabolite", "--out", str(out),
    ])
    payload = json.loads((out / "fig2_metabolite.json").read_text())
    assert len(payload["matrix"]) == 7


def test_eval_fig3(runner, cli_workspace):
    out = cli_workspace["root"] / "fig3"
    case_id = sorted(p.name for p in cli_workspace["data"].glob("case_*"))[0]
    _invoke(runner, [
        "eval", "fig3", "--ckpt", str(cli_workspace["ckpts"] / "filter_scaling_best.ckpt"),
        "--data", str(cli_workspace["data"]), "--case", case_id,
        "--lambdas", "0,0.05", "--out", str(out),
    ])
    assert (out / "fig3_strip.png").exists()
    payload = json.loads((out / "fig3.json").read_text())
    assert [p["label"] for p in payload["panels"]] == ["zero_fill", "lambda=0", "lambda=0.05", "ground_truth"]


def test_eval_fig4(runner, cli_workspace):
    out = cli_workspace["root"] / "fig4"
    _invoke(runner, [
        "eval", "fig4", "--ckpt", str(cli_workspace["ckpts"] / "filter_scaling_best.ckpt"),
        "--data", str(cli_workspace["data"]), "--splits", str(cli_workspace["splits"]),
        "--lambdas", "0,0.05,0.1", "--n-list", "16", "--out", str(out),
    ])
    curves = json.loads((out / "fig4.json").read_text())
    assert curves["lambda"] == [0.0, 0.05, 0.1]
    assert (out / "fig4.png").exists()


def test_infer_command(runner, cli_workspace, tmp_path):
    case_id = sorted(p.name for p in cli_workspace["data"].glob("case_*"))[0]
    out_png = tmp_path / "sr.png"
    result = _invoke(runner, [
        "infer", "--ckpt", str(cli_workspace["ckpts"] / "filter_scaling_best.ckpt"),
        "--data", str(cli_workspace["data"]), "--case", case_id,
        "--n", "16", "--metabolite", "Gly", "--lambda", "0.03", "--out", str(out_png),
    ])
    assert out_png.exists() and out_png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    payload = json.loads(result.output)
    assert set(payload["metrics"]) >= {"psnr", "ssim"}


def test_bad_fold_is_usage_error(runner, cli_workspace):
    result = CliRunner().invoke(main, [
        "train", "--data", str(cli_workspace["data"]), "--splits", str(cli_workspace["splits"]),
        "--fold", "99", "--out", "/tmp/never", "--epochs", "1",
    ])
    assert result.exit_code != 0
    assert "fold" in result.output


def test_help_lists_commands(runner):
    result = _invoke(runner, ["--help"])
    for cmd in ("phantom", "train", "eval", "serve", "infer"):
        assert cmd in result.output
