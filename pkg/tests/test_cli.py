import json

import pytest

from oaae import cli, ole

TINY = ["--synthetic-classes", "3", "--per-class", "8", "--side", "8"]


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps({"epochs": 1, "batch_size": 8, "channels": [4, 4, 4],
                                "hidden": 16, "latent_dim": 8}))
    return str(path)


@pytest.fixture
def checkpoint(tmp_path, config):
    out = tmp_path / "m.oaae"
    assert cli.main(["train", *TINY, "--config", config, "--novelty-class", "1", "--out", str(out)]) == 0
    return out


def test_train_writes_checkpoint_and_losses(checkpoint):
    assert checkpoint.read_bytes()[:4] == b"OAAE"
    lines = checkpoint.with_suffix(".losses.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[0].startswith("epoch,")


def test_train_is_reproducible(tmp_path, config, checkpoint):
    again = tmp_path / "again.oaae"
    cli.main(["train", *TINY, "--config", config, "--novelty-class", "1", "--out", str(again)])
    assert again.read_bytes() == checkpoint.read_bytes()


def test_missing_config(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert cli.main(["train", "--config", str(missing), "--out", str(tmp_path / "x")]) == 2
    assert str(missing) in capsys.readouterr().err


def test_invalid_override(tmp_path, config, capsys):
    assert cli.main(["train", *TINY, "--config", config, "--epochs", "0", "--out", str(tmp_path / "x")]) == 2


def test_score_rows_and_kinds(tmp_path, checkpoint, capsys):
    rows = {}
    for kind in ("angle", "mse"):
        out = tmp_path / f"{kind}.csv"
        code = cli.main(["score", *TINY, "--checkpoint", str(checkpoint), "--kind", kind,
                         "--novelty-class", "1", "--out", str(out)])
        assert code == 0
        rows[kind] = out.read_text().splitlines()
        assert len(rows[kind]) == 1 + 3 * 8
        assert rows[kind][1].endswith(f",{kind}")
    assert rows["angle"][1].split(",")[1] != rows["mse"][1].split(",")[1]
    assert "AUROC=" in capsys.readouterr().err


def test_score_to_stdout(checkpoint, capsys):
    assert cli.main(["score", *TINY, "--checkpoint", str(checkpoint)]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "example_id,score,is_novel,score_kind"


def test_score_corrupt_checkpoint(tmp_path, checkpoint, capsys):
    bad = tmp_path / "bad.oaae"
    bad.write_bytes(b"XXXX" + checkpoint.read_bytes()[4:])
    assert cli.main(["score", *TINY, "--checkpoint", str(bad)]) == 3
    err = capsys.readouterr().err
    assert str(bad) in err and "offset 0" in err


def test_score_missing_checkpoint(tmp_path):
    assert cli.main(["score", *TINY, "--checkpoint", str(tmp_path / "missing.oaae")]) == 3


def test_eval_single_cell(tmp_path, config, capsys):
    csv_path = tmp_path / "r.csv"
    code = cli.main(["eval", *TINY, "--config", config, "--novelty-class", "2",
                     "--out-csv", str(csv_path), "--checkpoint-dir", str(tmp_path)])
    assert code == 0
    lines = csv_path.read_text().splitlines()
    assert len(lines) == 3 and lines[1].startswith("OAAE,synthetic,2,")
    doc = json.loads(csv_path.with_suffix(".json").read_text())
    assert doc["config"]["epochs"] == 1 and "synthetic" in doc["provenance"]
    assert capsys.readouterr().out.splitlines()[0].split() == ["method", "2", "Mean"]


def test_eval_all_classes_and_report(tmp_path, config, capsys):
    csv_path = tmp_path / "all.csv"
    code = cli.main(["eval", "--synthetic-classes", "10", "--per-class", "4", "--side", "8",
                     "--config", config, "--all-classes", "--out-csv", str(csv_path),
                     "--out-table", str(tmp_path / "t.txt")])
    assert code == 0
    assert len(csv_path.read_text().splitlines()) == 1 + 10 + 1
    header = (tmp_path / "t.txt").read_text().splitlines()[0].split()
    assert header == ["method"] + [str(c) for c in range(10)] + ["Mean"]
    capsys.readouterr()
    assert cli.main(["report", str(csv_path)]) == 0
    assert "OAAE (synthetic)" in capsys.readouterr().out


def test_eval_needs_class(config):
    assert cli.main(["eval", *TINY, "--config", config]) == 2


def test_check_passes_and_is_deterministic(capsys):
    assert cli.main(["check", "--seed", "7"]) == 0
    first = capsys.readouterr().out
    assert cli.main(["check", "--seed", "7"]) == 0
    assert capsys.readouterr().out == first
    assert "all" in first and "passed" in first


def test_check_catches_sign_bug(monkeypatch, capsys):
    correct = ole.ole_grad
    monkeypatch.setattr(ole, "ole_grad", lambda *a, **k: -correct(*a, **k))
    assert cli.main(["check"]) == 4
    out = capsys.readouterr().out
    assert "FAILED" in out and "ole_gradient_fd" in out
