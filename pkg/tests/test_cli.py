"""End-to-end command-line behaviour: flags, outputs, and exit codes."""

import json

import pytest

from optbench.cli import main

TINY = [
    "--batch-size", "16",
    "--synthetic-classes", "3",
    "--synthetic-train-per-class", "12",
    "--synthetic-test-per-class", "4",
]


def train(tmp_path, *extra):
    argv = ["train", "--model", "vgg-lite-tiny", "--optimizer", "adam",
            "--epochs", "1", "--out", str(tmp_path), *TINY, *extra]
    return main(argv)


def test_train_writes_run_file(tmp_path, capsys):
    assert train(tmp_path) == 0
    out = capsys.readouterr().out
    assert "wrote" in out
    assert "best test f1:" in out
    path = tmp_path / "vgg-lite-tiny_adam_seed0.jsonl"
    assert path.exists()
    lines = path.read_text().splitlines()
    assert json.loads(lines[0])["kind"] == "header"
    assert json.loads(lines[1])["epoch"] == 1


def test_train_multiple_seeds(tmp_path, capsys):
    assert train(tmp_path, "--seed", "1", "--seed", "2") == 0
    assert (tmp_path / "vgg-lite-tiny_adam_seed1.jsonl").exists()
    assert (tmp_path / "vgg-lite-tiny_adam_seed2.jsonl").exists()
    assert capsys.readouterr().out.count("wrote") == 2


def test_report_renders_table(tmp_path, capsys):
    assert train(tmp_path) == 0
    assert train(tmp_path, "--optimizer", "sgd") == 0
    capsys.readouterr()
    assert main(["report", "--runs", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "best test f1 by model and optimizer" in out
    assert "adam" in out and "sgd" in out
    assert "(ep 1)" in out


def test_report_aggregates_seeds(tmp_path, capsys):
    assert train(tmp_path, "--seed", "3", "--seed", "4") == 0
    capsys.readouterr()
    assert main(["report", "--runs", str(tmp_path)]) == 0
    assert "+-" in capsys.readouterr().out


def test_report_writes_csv(tmp_path, capsys):
    assert train(tmp_path) == 0
    csv_dir = tmp_path / "curves"
    assert main(["report", "--runs", str(tmp_path),
                 "--csv", str(csv_dir)]) == 0
    csv_files = list(csv_dir.glob("*.csv"))
    assert len(csv_files) == 1
    header = csv_files[0].read_text().splitlines()[0]
    assert header == "epoch,train_loss,test_loss,test_f1"


def test_report_val_metric(tmp_path, capsys):
    assert train(tmp_path) == 0
    capsys.readouterr()
    assert main(["report", "--runs", str(tmp_path),
                 "--metric", "val_f1"]) == 0
    assert "best val f1" in capsys.readouterr().out


def test_selftest_passes():
    assert main(["selftest"]) == 0


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("optbench ")


def test_unknown_optimizer_is_usage_error(tmp_path, capsys):
    assert train(tmp_path, "--optimizer", "nadam") == 1
    assert "configuration error" in capsys.readouterr().err


def test_missing_required_flag(capsys):
    assert main(["train", "--optimizer", "adam"]) == 1
    assert "configuration error" in capsys.readouterr().err


def test_unknown_command(capsys):
    assert main(["frobnicate"]) == 1


def test_invalid_hyperparameter(tmp_path, capsys):
    assert train(tmp_path, "--lr", "-0.5") == 1
    assert "configuration error" in capsys.readouterr().err


def test_missing_data_dir_exit_code(tmp_path, capsys):
    assert train(tmp_path, "--data", str(tmp_path / "nope")) == 2
    assert "data error" in capsys.readouterr().err


def test_report_requires_directory(tmp_path, capsys):
    assert main(["report", "--runs", str(tmp_path / "nope")]) == 2
    assert "data error" in capsys.readouterr().err


def test_report_requires_run_files(tmp_path, capsys):
    assert main(["report", "--runs", str(tmp_path)]) == 2
    assert "no *.jsonl run records" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_diverging_run_exit_code(tmp_path, capsys):
    rc = train(tmp_path, "--optimizer", "sgd", "--lr", "1e12",
               "--epochs", "2", "--batch-size", "8")
    assert rc == 3
    assert "numerical failure" in capsys.readouterr().err
