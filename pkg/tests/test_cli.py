"""End-to-end command-line interface tests (subprocess level)."""

import json
import os
import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "cfisac.cli"]


def run(args, cwd, env=None):
    full_env = dict(os.environ)
    if env:
        full_env.update(env)
    return subprocess.run(CLI + args, cwd=cwd, env=full_env,
                          capture_output=True, text=True)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Tiny config plus generated train/test datasets."""
    root = tmp_path_factory.mktemp("cli")
    cfg = {"M": 2, "U": 2, "N_t": 4, "P": 0.5, "beta_s": 1.0, "epochs": 1,
           "batch_size": 8, "train_samples": 24, "test_samples": 8,
           "hidden": 4, "depth": 1, "seed": 3}
    (root / "cfg.json").write_text(json.dumps(cfg))
    for name, count in (("train.bin", 24), ("test.bin", 8)):
        r = run(["gen-data", "--config", "cfg.json", "--out", name,
                 "--count", str(count)], cwd=root)
        assert r.returncode == 0, r.stderr
    return root


def test_gen_data_deterministic(workdir, tmp_path):
    r1 = run(["--threads", "1", "gen-data", "--config", workdir / "cfg.json",
              "--out", tmp_path / "a.bin", "--count", "16"], cwd=workdir)
    r2 = run(["--threads", "1", "gen-data", "--config", workdir / "cfg.json",
              "--out", tmp_path / "b.bin", "--count", "16"], cwd=workdir)
    assert r1.returncode == 0 and r2.returncode == 0
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == "completed"


def test_seed_env_fallback(workdir, tmp_path):
    env = {"CFISAC_SEED": "77"}
    cfg = {"M": 2, "U": 2, "N_t": 4}
    (tmp_path / "noseed.json").write_text(json.dumps(cfg))
    r = run(["gen-data", "--config", tmp_path / "noseed.json",
             "--out", tmp_path / "c.bin", "--count", "4"], cwd=workdir, env=env)
    assert r.returncode == 0, r.stderr
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 77
    # an explicit flag beats the environment
    r = run(["gen-data", "--config", tmp_path / "noseed.json", "--seed", "5",
             "--out", tmp_path / "d.bin", "--count", "4"], cwd=workdir, env=env)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 5


def test_baseline_command(workdir):
    r = run(["baseline", "--method", "cb-comm", "--config", "cfg.json",
             "--data", "test.bin", "--out", "bl"], cwd=workdir)
    assert r.returncode == 0, r.stderr
    report = (workdir / "bl" / "report.csv").read_text().strip().split("\n")
    assert report[0].startswith("method,beta_s,M,U,")
    assert report[1].startswith("cb-comm,1,2,2,")
    assert (workdir / "bl" / "report.json").exists()


def test_train_eval_roundtrip(workdir):
    r = run(["--threads", "1", "train", "--config", "cfg.json",
             "--data", "train.bin", "--test", "test.bin", "--out", "run",
             "--quiet"], cwd=workdir)
    assert r.returncode == 0, r.stderr
    for artifact in ("manifest.json", "history.csv", "best.ckpt", "last.ckpt"):
        assert (workdir / "run" / artifact).exists()
    r = run(["eval", "--ckpt", "run/best.ckpt", "--config", "cfg.json",
             "--data", "test.bin", "--out", "ev"], cwd=workdir)
    assert r.returncode == 0, r.stderr
    report = (workdir / "ev" / "report.csv").read_text().strip().split("\n")
    assert report[1].startswith("gnn,")


def test_train_determinism(workdir):
    for out in ("det1", "det2"):
        r = run(["--threads", "1", "train", "--config", "cfg.json",
                 "--data", "train.bin", "--test", "test.bin", "--out", out,
                 "--quiet"], cwd=workdir)
        assert r.returncode == 0, r.stderr
    assert (workdir / "det1" / "history.csv").read_bytes() == \
           (workdir / "det2" / "history.csv").read_bytes()
    assert (workdir / "det1" / "best.ckpt").read_bytes() == \
           (workdir / "det2" / "best.ckpt").read_bytes()


def test_scale_aps_command(workdir):
    r = run(["scale-aps", "--ckpt", "run/best.ckpt", "--config", "cfg.json",
             "--m-list", "2,3", "--count", "4", "--no-wmmse", "--out", "sc"],
            cwd=workdir)
    assert r.returncode == 0, r.stderr
    lines = (workdir / "sc" / "report.csv").read_text().strip().split("\n")
    assert len(lines) == 3


def test_exit_codes(workdir, tmp_path):
    # unknown flag / subcommand -> 2
    r = run(["definitely-not-a-command"], cwd=workdir)
    assert r.returncode == 2
    # invalid configuration -> 2
    (tmp_path / "bad.json").write_text('{"M": 0}')
    r = run(["baseline", "--method", "cb-comm", "--config", tmp_path / "bad.json",
             "--data", "test.bin", "--out", "x"], cwd=workdir)
    assert r.returncode == 2
    assert "error:" in r.stderr
    # unreadable input -> 3
    r = run(["baseline", "--method", "cb-comm", "--config", "cfg.json",
             "--data", "missing.bin", "--out", "x"], cwd=workdir)
    assert r.returncode == 3
    # corrupted dataset -> 3
    raw = (workdir / "test.bin").read_bytes()
    (tmp_path / "trunc.bin").write_bytes(raw[:40])
    r = run(["baseline", "--method", "cb-comm", "--config", "cfg.json",
             "--data", tmp_path / "trunc.bin", "--out", "x"], cwd=workdir)
    assert r.returncode == 3
    # config/checkpoint mismatch -> 2
    (tmp_path / "other.json").write_text(
        json.dumps({"M": 2, "U": 2, "N_t": 6}))
    r = run(["gen-data", "--config", tmp_path / "other.json",
             "--out", tmp_path / "o.bin", "--count", "4"], cwd=workdir)
    assert r.returncode == 0
    r = run(["eval", "--ckpt", "run/best.ckpt", "--config", tmp_path / "other.json",
             "--data", tmp_path / "o.bin", "--out", "x"], cwd=workdir)
    assert r.returncode == 2


def test_unknown_config_field_rejected(workdir, tmp_path):
    (tmp_path / "weird.json").write_text('{"M": 2, "warp_drive": true}')
    r = run(["gen-data", "--config", tmp_path / "weird.json",
             "--out", tmp_path / "w.bin", "--count", "2"], cwd=workdir)
    assert r.returncode == 2
    assert "warp_drive" in r.stderr
