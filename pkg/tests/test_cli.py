import json

import pytest

from objaware.cli import main

TINY = ["--dim", "16", "--heads", "2", "--decoder-layers", "1"]


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen-data", "--clips", "12", "--clips-per-video", "4", "--out", str(root / "data")]) == 0
    assert main(["train", "--data", str(root / "data"), "--out", str(root / "run"), "--epochs", "1",
                 "--batch-size", "4", *TINY]) == 0
    return root


def summary(path):
    return json.loads((path / "summary.json").read_text())


def test_gen_data_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["gen-data", "--clips", "6", "--seed", "3", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "clips.jsonl").read_bytes() == (tmp_path / "b" / "clips.jsonl").read_bytes()
    s = summary(tmp_path / "a")
    assert s["clips"] == 6 and s["command"] == "gen-data"


def test_train_writes_outputs_and_config_replays(trained, tmp_path):
    run = trained / "run"
    assert (run / "last.ckpt").exists() and (run / "metrics.jsonl").exists()
    cfg = json.loads((run / "resolved_config.json").read_text())
    assert cfg["train"]["model"]["dim"] == 16 and cfg["train"]["epochs"] == 1
    # the resolved config reproduces the run; flags still win over it
    assert main(["train", "--config", str(run / "resolved_config.json"), "--out", str(tmp_path),
                 "--epochs", "0"]) == 0
    assert summary(tmp_path)["steps"] == 0
    assert json.loads((tmp_path / "resolved_config.json").read_text())["train"]["model"]["dim"] == 16


@pytest.mark.parametrize("command, extra", [
    ("eval-mcq", ["--candidates", "3"]),
    ("eval-retrieval", []),
    ("eval-classify", []),
    ("eval-grounding", []),
    ("ground", []),
    ("extract-features", []),
])
def test_eval_commands_run(trained, tmp_path, command, extra):
    assert main([command, "--data", str(trained / "data"), "--checkpoint", str(trained / "run" / "last.ckpt"),
                 "--out", str(tmp_path), *extra]) == 0
    assert summary(tmp_path)["command"] == command


def test_grounding_baselines(trained, tmp_path):
    assert main(["eval-grounding", "--data", str(trained / "data"), "--mode", "random", "--seeds", "10",
                 "--out", str(tmp_path)]) == 0
    s = summary(tmp_path)
    assert s["seeds"] == 10 and "std" in s
    assert main(["eval-grounding", "--data", str(trained / "data"), "--mode", "gt_matching",
                 "--out", str(tmp_path)]) == 0
    assert 0 <= summary(tmp_path)["accuracy"] <= 1


def test_grad_check_command(trained, tmp_path):
    assert main(["grad-check", "--data", str(trained / "data"), "--batch-size", "2", "--per-group", "3",
                 "--out", str(tmp_path), *TINY]) == 0
    assert summary(tmp_path)["passed"] is True


def test_exit_codes(trained, tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["train", "--bogus"])
    assert e.value.code == 2
    assert main(["train", "--out", str(tmp_path)]) == 2  # --data missing
    bad = tmp_path / "bad.json"
    bad.write_text('{"train": {"epochs": -1}}')
    assert main(["train", "--data", str(trained / "data"), "--config", str(bad), "--out", str(tmp_path)]) == 2
    bad.write_text('{"train": {"colour": 1}}')
    assert main(["train", "--data", str(trained / "data"), "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["eval-mcq", "--data", str(trained / "data"), "--checkpoint", str(tmp_path / "none.ckpt"),
                 "--out", str(tmp_path)]) == 1
    assert "failed" in capsys.readouterr().err
