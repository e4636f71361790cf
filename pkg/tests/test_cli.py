import json

import pytest

from sfpump.cli import main
from sfpump.config import ConfigError, load_config, parse_config


def run(*args):
    return main([str(a) for a in args])


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        run("gen")
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        run("gen", "--out", "x", "--size", "5by6")
    assert exc.value.code == 1


def test_bad_instance_file_exits_2(tmp_path):
    (tmp_path / "bad.mip").write_text("version: 1\nkind: IP\n")
    assert run("fp", tmp_path / "bad.mip") == 2
    assert run("fp", tmp_path / "missing") == 2


def test_bad_checkpoint_exits_2(tmp_path):
    assert run("gen", "--out", tmp_path / "inst", "--count", 2, "--size", "3x4") == 0
    (tmp_path / "junk.npz").write_bytes(b"junk")
    assert run("eval", tmp_path / "junk.npz", tmp_path / "inst") == 2


def test_config_rejects_unknown_keys(tmp_path):
    with pytest.raises(ConfigError, match="lerning_rate"):
        parse_config({"train": {"lerning_rate": 0.1}})
    with pytest.raises(ConfigError):
        parse_config({"trian": {}})
    with pytest.raises(ConfigError):
        parse_config({"train": {"iterations": "ten"}})
    cfg_path = tmp_path / "c.yaml"
    cfg_path.write_text("train:\n  iterations: 2\n  learning_rate: 1\nenv:\n  max_steps: 7\n")
    cfg = load_config(cfg_path)
    assert cfg.train.iterations == 2 and cfg.train.learning_rate == 1.0 and cfg.env.max_steps == 7
    cfg_path.write_text("pools:\n  sizes: 3\n")
    assert run("train", "--variant", "mlp", "--config", cfg_path, "--out", tmp_path / "r") == 1


def test_gen_fp_trace(tmp_path):
    assert run("gen", "--out", tmp_path / "inst", "--count", 3, "--size", "3x4", "--kind", "MIP") == 0
    manifest = json.loads((tmp_path / "inst" / "manifest.json").read_text())
    assert manifest["count"] == 3
    assert run("fp", tmp_path / "inst", "--cap", 20, "--trace", tmp_path / "t.jsonl",
               "--out", tmp_path / "fp.csv") == 0
    lines = (tmp_path / "t.jsonl").read_text().splitlines()
    assert json.loads(lines[0])["instance"]


def test_train_eval_compare_flow(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("train:\n  iterations: 2\n  episodes_per_iteration: 3\n"
                   "env:\n  max_steps: 8\npools:\n  train_size: 6\n  eval_size: 3\n")
    run_dir = tmp_path / "run"
    assert run("train", "--variant", "cnn", "--size", "3x4", "--config", cfg, "--out", run_dir,
               "--quiet") == 0
    ckpt = run_dir / "checkpoints" / "cnn_IP_3x4_s0_best.npz"
    assert ckpt.exists()
    assert (run_dir / "logs" / "train_cnn_IP_3x4_s0.csv").read_text().count("\n") == 3
    eval_dir = run_dir / "instances" / "eval_IP_3x4"
    assert run("eval", ckpt, eval_dir, "--cap", 8, "--run-dir", run_dir) == 0
    assert run("eval", "fp", eval_dir, "--cap", 8, "--run-dir", run_dir) == 0
    # wrong size instances cannot be fed to this checkpoint
    assert run("gen", "--out", tmp_path / "big", "--count", 2, "--size", "5x6") == 0
    assert run("eval", ckpt, tmp_path / "big") == 2
    capsys.readouterr()
    assert run("compare", run_dir) == 0
    out = capsys.readouterr().out
    assert "SFP-CNN" in out and "absent" in out


def test_selftest_passes():
    assert run("selftest") == 0
