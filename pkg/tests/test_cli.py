import json

import pytest
from click.testing import CliRunner

from tubeground.cli import main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workspace(runner, tmp_path_factory):
    """Generate once, train once; downstream commands reuse the artifacts."""
    data_dir = tmp_path_factory.mktemp("cli-data")
    run_dir = tmp_path_factory.mktemp("cli-run")
    gen = runner.invoke(
        main,
        ["generate", "--out", str(data_dir), "--seed", "2", "--samples", "4",
         "--frames", "10", "--regions", "3", "--feature-dim", "8", "--frame-feature-dim", "6"],
    )
    assert gen.exit_code == 0, gen.output
    gen_out = json.loads(gen.output)
    tr = runner.invoke(
        main,
        ["train",
         "--annotations", gen_out["annotations_path"],
         "--features", gen_out["manifest_path"],
         "--out", str(run_dir),
         "--epochs", "1", "--batch-size", "4", "--model-dim", "12", "--word-dim", "8",
         "--lang-hidden", "6", "--frame-hidden", "6", "--layers", "1", "--window", "2",
         "--widths", "2,4,8"],
    )
    assert tr.exit_code == 0, tr.output
    return gen_out, json.loads(tr.output)


def test_generate_then_stats(runner, workspace):
    gen_out, _ = workspace
    res = runner.invoke(main, ["stats", "--annotations", gen_out["annotations_path"]])
    assert res.exit_code == 0, res.output
    assert json.loads(res.output)["stats"]["total_sentences"] == 4


def test_train_reports_hash(workspace):
    _, train_out = workspace
    assert train_out["epochs_run"] == 1
    assert len(train_out["checkpoint_hash"]) == 64


@pytest.mark.parametrize("mode", ["greedy", "dynamic"])
def test_eval_modes(runner, workspace, mode):
    gen_out, train_out = workspace
    res = runner.invoke(
        main,
        ["eval", "--checkpoint", train_out["checkpoint_path"],
         "--annotations", gen_out["annotations_path"],
         "--features", gen_out["manifest_path"], "--decode", mode],
    )
    assert res.exit_code == 0, res.output
    report = json.loads(res.output)["report"]
    assert report["sample_count"] == 4


def test_decode_writes_file(runner, workspace, tmp_path):
    gen_out, train_out = workspace
    out_file = tmp_path / "preds.json"
    res = runner.invoke(
        main,
        ["decode", "--checkpoint", train_out["checkpoint_path"],
         "--annotations", gen_out["annotations_path"],
         "--features", gen_out["manifest_path"], "--out", str(out_file)],
    )
    assert res.exit_code == 0, res.output
    doc = json.loads(out_file.read_text())
    assert len(doc["predictions"]) == 4


def test_config_file_with_flag_override(runner, workspace, tmp_path):
    gen_out, _ = workspace
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "model_dim = 12\nword_dim = 8\nlang_hidden = 6\nframe_hidden = 6\n"
        "layers = 2\nwindow = 2\nwidths = 2,4,8\nepochs = 3\nbatch_size = 4\n"
    )
    out_dir = tmp_path / "run"
    res = runner.invoke(
        main,
        ["train", "--annotations", gen_out["annotations_path"],
         "--features", gen_out["manifest_path"], "--out", str(out_dir),
         "--config", str(cfg), "--epochs", "1"],  # flag overrides file
    )
    assert res.exit_code == 0, res.output
    assert json.loads(res.output)["epochs_run"] == 1


def test_ablation_flags_accepted(runner, workspace, tmp_path):
    gen_out, _ = workspace
    out_dir = tmp_path / "ablate"
    res = runner.invoke(
        main,
        ["train", "--annotations", gen_out["annotations_path"],
         "--features", gen_out["manifest_path"], "--out", str(out_dir),
         "--epochs", "1", "--batch-size", "4", "--model-dim", "12", "--word-dim", "8",
         "--lang-hidden", "6", "--frame-hidden", "6", "--layers", "1", "--window", "2",
         "--widths", "2,4,8", "--disable-explicit", "--query-mode", "last_hidden"],
    )
    assert res.exit_code == 0, res.output


def test_bad_annotations_path_fails_cleanly(runner, workspace):
    res = runner.invoke(main, ["stats", "--annotations", "/nonexistent.json"])
    assert res.exit_code != 0
