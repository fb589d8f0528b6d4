"""End-to-end command line tests driven through cli.main(argv)."""

import json

import numpy as np
import pytest

from vcnet import autodiff as ad
from vcnet.cli import main


@pytest.fixture(scope="module")
def majority_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "majority.jsonl"
    assert main(["gen", "--task", "majority", "--n", "40", "--seed", "5",
                 "--min-nodes", "5", "--max-nodes", "7",
                 "--out", str(path)]) == 0
    return path


def _train_args(data, out, *extra):
    return ["train", "--data", str(data), "--out", str(out),
            "--epochs", "2", "--dh", "3", "--dv", "3", "--steps", "3",
            "--batch", "20", "--seed", "1", *extra]


# -- usage and exit codes ---------------------------------------------------------


def test_no_subcommand_is_usage_error(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert main(["train", "--frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err


def test_missing_data_flag(capsys):
    assert main(["train"]) == 1
    assert "--data" in capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "train" in capsys.readouterr().out


def test_missing_dataset_file_is_data_error(tmp_path, capsys):
    assert main(_train_args(tmp_path / "nope.jsonl", tmp_path / "run")) == 2


def test_unknown_task_is_config_error(tmp_path):
    assert main(["gen", "--task", "rings", "--n", "3",
                 "--out", str(tmp_path / "x.jsonl")]) == 1


def test_bad_node_range_is_config_error(tmp_path):
    assert main(["gen", "--task", "parity", "--n", "3", "--min-nodes", "9",
                 "--max-nodes", "8", "--out", str(tmp_path / "x.jsonl")]) == 1


# -- gen -----------------------------------------------------------------------------


def test_gen_is_deterministic_and_reports(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["gen", "--task", "parity", "--n", "12", "--seed", "9", "--out", str(a)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out == {"task": "long-range-parity", "n": 12, "n_pos": out["n_pos"],
                   "path": str(a), "seed": 9}
    assert main(["gen", "--task", "parity", "--n", "12", "--seed", "9", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


# -- train ---------------------------------------------------------------------------


def test_train_writes_all_artifacts(majority_file, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(_train_args(majority_file, out)) == 0
    for name in ("checkpoint.json", "history.csv", "metrics.json",
                 "manifest.json", "curves.png"):
        assert (out / name).exists(), name
    stdout = capsys.readouterr().out
    summary = json.loads(stdout)
    assert 0.0 <= summary["val"]["auc"] <= 1.0
    assert summary["epochs_run"] == 2
    assert (out / "metrics.json").read_text() == json.dumps(
        summary, sort_keys=True, indent=1) + "\n"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["d_h"] == 3
    assert manifest["data"]["n_train"] + manifest["data"]["n_val"] \
        + manifest["data"]["n_test"] == 40
    assert (out / "curves.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_train_reruns_byte_identical(majority_file, tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(_train_args(majority_file, out1)) == 0
    assert main(_train_args(majority_file, out2)) == 0
    for name in ("checkpoint.json", "history.csv", "metrics.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_train_config_file_and_flag_precedence(majority_file, tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"dh": 5, "epochs": 1}))
    out = tmp_path / "run"
    args = ["train", "--data", str(majority_file), "--out", str(out),
            "--dv", "3", "--steps", "3", "--config", str(cfg_path)]
    assert main(args) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["d_h"] == 5
    assert manifest["config"]["max_epochs"] == 1
    # explicit flag beats the file
    out2 = tmp_path / "run2"
    assert main(["train", "--data", str(majority_file), "--out", str(out2),
                 "--dv", "3", "--steps", "3", "--dh", "2",
                 "--config", str(cfg_path)]) == 0
    assert json.loads((out2 / "manifest.json").read_text())["config"]["d_h"] == 2


def test_unknown_config_key_is_config_error(majority_file, tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"depth": 3}))
    assert main(["train", "--data", str(majority_file), "--out",
                 str(tmp_path / "r"), "--config", str(cfg_path)]) == 1
    assert "depth" in capsys.readouterr().err


# -- eval ----------------------------------------------------------------------------


@pytest.fixture(scope="module")
def trained_run(majority_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    val = majority_file.parent / "val.jsonl"
    assert main(["gen", "--task", "majority", "--n", "16", "--seed", "77",
                 "--min-nodes", "5", "--max-nodes", "7", "--out", str(val)]) == 0
    assert main(_train_args(majority_file, out, "--val", str(val))) == 0
    return out, val


def test_eval_matches_training_metrics(trained_run, capsys):
    out, val = trained_run
    capsys.readouterr()
    assert main(["eval", "--data", str(val),
                 "--checkpoint", str(out / "checkpoint.json")]) == 0
    eval_report = json.loads(capsys.readouterr().out)
    train_metrics = json.loads((out / "metrics.json").read_text())
    assert eval_report == train_metrics["val"]


def test_eval_scores_csv_and_figure(trained_run, tmp_path, capsys):
    out, val = trained_run
    scores_path = tmp_path / "scores.csv"
    assert main(["eval", "--data", str(val), "--checkpoint",
                 str(out / "checkpoint.json"), "--scores", str(scores_path)]) == 0
    lines = scores_path.read_text().splitlines()
    assert lines[0] == "id,score,label"
    assert len(lines) == 17
    for line in lines[1:]:
        rid, score, label = line.split(",")
        assert rid.startswith("attr-majority-")
        assert 0.0 < float(score) < 1.0
        assert label in ("0", "1")
    png = scores_path.with_suffix(".png")
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_eval_threads_do_not_change_output(trained_run, capsys):
    out, val = trained_run
    capsys.readouterr()
    assert main(["eval", "--data", str(val), "--checkpoint",
                 str(out / "checkpoint.json"), "--threads", "1"]) == 0
    one = capsys.readouterr().out
    assert main(["eval", "--data", str(val), "--checkpoint",
                 str(out / "checkpoint.json"), "--threads", "4"]) == 0
    assert capsys.readouterr().out == one


def test_eval_corrupt_checkpoint_is_data_error(trained_run, tmp_path):
    _, val = trained_run
    bad = tmp_path / "bad.json"
    bad.write_text("{\"format\": \"something-else\"}")
    assert main(["eval", "--data", str(val), "--checkpoint", str(bad)]) == 2
    missing = tmp_path / "gone.json"
    assert main(["eval", "--data", str(val), "--checkpoint", str(missing)]) == 2


def test_eval_requires_both_paths(trained_run):
    out, val = trained_run
    assert main(["eval", "--data", str(val)]) == 1
    assert main(["eval", "--checkpoint", str(out / "checkpoint.json")]) == 1


# -- gradcheck -------------------------------------------------------------------------


def test_gradcheck_passes_and_reports(capsys):
    assert main(["gradcheck", "--graphs", "2", "--steps", "3", "--seed", "0"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["passed"] is True
    assert rep["n_graphs"] == 2
    assert rep["max_rel_err"] < rep["tol"]


def test_gradcheck_detects_a_wrong_derivative(monkeypatch, capsys):
    true_sigmoid = ad.sigmoid

    def broken_sigmoid(x, tape=None):
        out = true_sigmoid(x, None)
        return ad._emit(tape, out.data, (x,), lambda g: (g * 0.123,), "sigmoid")

    monkeypatch.setattr("vcnet.autodiff.sigmoid", broken_sigmoid)
    assert main(["gradcheck", "--graphs", "1", "--steps", "2"]) == 3
    rep = json.loads(capsys.readouterr().out)
    assert rep["passed"] is False
    assert rep["max_rel_err"] > rep["tol"]
