import json
import os
import subprocess
import sys

import pytest

from dollyshot.cli import main, read_curve_csv
from dollyshot.config import ConfigError, load_config, resolved_config
from dollyshot.demos import load_dataset


def run_cli(*argv):
    return main(list(argv))


def test_config_defaults_resolved():
    cfg = resolved_config()
    assert cfg["ppo"]["total_steps"] == 200_000
    assert cfg["reward"]["lambda_area"] == 1.0
    assert cfg["format_version"] == 1
    assert cfg["profile"] == "desk"


def test_paper_profile_scales_steps():
    cfg = resolved_config(profile="paper")
    assert cfg["ppo"]["total_steps"] == 1_000_000


def test_unknown_config_key_rejected():
    with pytest.raises(ConfigError, match="unknown config key: ppo.warp"):
        resolved_config({"ppo": {"warp": 1}})
    with pytest.raises(ConfigError, match="unknown config key: turbo"):
        resolved_config({"turbo": True})


def test_config_type_checks():
    with pytest.raises(ConfigError):
        resolved_config({"ppo": {"total_steps": "many"}})
    with pytest.raises(ConfigError):
        resolved_config({"env": {"task": 3}})


def test_config_file_merge(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"reward": {"lambda_steer": 0.9}}))
    cfg = load_config(str(path))
    assert cfg["reward"]["lambda_steer"] == 0.9
    assert cfg["reward"]["lambda_area"] == 1.0


def test_usage_error_exit_code():
    assert run_cli("train", "--algo", "gail", "--task", "base") == 1  # missing --demos
    assert run_cli("eval", "--checkpoint", "x", "--starts", "nowhere") == 2  # missing file -> data error first


def test_record_then_train_then_eval_then_report(tmp_path):
    demos = tmp_path / "d.demos.jsonl"
    assert run_cli("record", "--task", "base", "--diversity", "low",
                   "--count", "2", "--seed", "1", "--out", str(demos)) == 0
    dataset = load_dataset(demos, expect_task="base")
    assert len(dataset) == 2

    outdir = tmp_path / "runs"
    assert run_cli("train", "--algo", "ppo", "--task", "base", "--seeds", "1",
                   "--steps", "1024", "--outdir", str(outdir), "--run-id", "p") == 0
    ckpt = outdir / "p" / "p_seed0.ckpt.json"
    curve = outdir / "p" / "p_seed0.curve.csv"
    assert ckpt.exists() and curve.exists()
    rows = read_curve_csv(str(curve))
    assert rows and "mean_ep_reward" in rows[0]
    with open(curve) as fh:
        first = fh.readline()
    assert first.startswith("#")
    assert "config" in first

    trials = tmp_path / "trials.jsonl"
    assert run_cli("eval", "--checkpoint", str(ckpt), "--starts", "left,centre",
                   "--episodes", "2", "--twin", "--out", str(trials)) == 0
    report_dir = tmp_path / "report"
    assert run_cli("report", "--trials", str(trials), "--outdir", str(report_dir)) == 0
    assert (report_dir / "framing_errors.csv").exists()
    assert (report_dir / "srcc.csv").exists()
    assert (report_dir / "report.md").exists()


def test_train_gail_requires_demos_flag():
    assert run_cli("train", "--algo", "gail", "--task", "base", "--seeds", "1") == 1


def test_train_seed_count_produces_matching_outputs(tmp_path):
    outdir = tmp_path / "runs"
    assert run_cli("train", "--algo", "ppo", "--task", "base", "--seeds", "2",
                   "--steps", "1024", "--outdir", str(outdir), "--run-id", "multi") == 0
    files = sorted(os.listdir(outdir / "multi"))
    assert files == [
        "multi_seed0.ckpt.json", "multi_seed0.curve.csv",
        "multi_seed1.ckpt.json", "multi_seed1.curve.csv",
    ]


def test_identical_train_invocations_identical_outputs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for outdir in (a, b):
        assert run_cli("train", "--algo", "ppo", "--task", "base", "--seeds", "1",
                       "--steps", "1024", "--outdir", str(outdir), "--run-id", "r") == 0
    for name in ("r_seed0.ckpt.json", "r_seed0.curve.csv"):
        assert (a / "r" / name).read_bytes() == (b / "r" / name).read_bytes()


def test_eval_zero_episodes_writes_empty_log(tmp_path):
    outdir = tmp_path / "runs"
    run_cli("train", "--algo", "ppo", "--task", "base", "--seeds", "1",
            "--steps", "1024", "--outdir", str(outdir), "--run-id", "z")
    trials = tmp_path / "empty.jsonl"
    assert run_cli("eval", "--checkpoint", str(outdir / "z" / "z_seed0.ckpt.json"),
                   "--episodes", "0", "--out", str(trials)) == 0
    assert run_cli("report", "--trials", str(trials), "--outdir", str(tmp_path / "rep")) == 2


def test_replay_command_bit_identical(tmp_path):
    demos = tmp_path / "d.demos.jsonl"
    run_cli("record", "--task", "full", "--diversity", "moderate",
            "--count", "3", "--seed", "5", "--out", str(demos))
    assert run_cli("replay", "--trajectory", str(demos), "--index", "2") == 0
    assert run_cli("replay", "--trajectory", str(demos), "--index", "9") == 2


def test_gail_diversity_flag_checked(tmp_path):
    demos = tmp_path / "lo.demos.jsonl"
    run_cli("record", "--task", "base", "--diversity", "low", "--count", "2",
            "--seed", "0", "--out", str(demos))
    assert run_cli("train", "--algo", "gail", "--task", "base", "--seeds", "1",
                   "--steps", "1024", "--demos", str(demos),
                   "--diversity", "high", "--outdir", str(tmp_path)) == 2


def test_cli_entrypoint_subprocess(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "dollyshot.cli", "--version"],
        capture_output=True, text=True,
    )
    assert result.returncode == 0


def test_verify_command_passes_quickly(capsys):
    import time

    started = time.perf_counter()
    assert run_cli("verify") == 0
    assert time.perf_counter() - started < 60.0
    out = capsys.readouterr().out
    assert out.count("PASS") == 7 and "FAIL" not in out


def test_verify_names_failing_check(monkeypatch, capsys):
    # inject a gradient bug: the check must fail by name with nonzero exit
    from dollyshot import verify

    def broken_gradients():
        raise AssertionError("gradient relative error 1.0e+00 >= 1e-4")

    patched = tuple(
        (name, broken_gradients if name == "gradient-exactness" else fn)
        for name, fn in verify.ALL_CHECKS
    )
    monkeypatch.setattr(verify, "ALL_CHECKS", patched)
    assert run_cli("verify") == 3
    out = capsys.readouterr().out
    assert "FAIL gradient-exactness" in out


def test_checkpoint_embeds_config(tmp_path):
    outdir = tmp_path / "runs"
    run_cli("train", "--algo", "ppo", "--task", "base", "--seeds", "1",
            "--steps", "1024", "--outdir", str(outdir), "--run-id", "c")
    doc = json.loads((outdir / "c" / "c_seed0.ckpt.json").read_text())
    assert doc["format_version"] == 1
    assert doc["meta"]["config"]["ppo"]["clip_eps"] == 0.2
    assert doc["meta"]["total_steps"] == 1024
