"""Experiment reports and their CSV/JSON serialization."""

import json

import numpy as np
import pytest

from cfisac import experiments, gnn, training
from cfisac.data import generate_dataset
from cfisac.system import ConfigError, SystemConfig


@pytest.fixture(scope="module")
def setup():
    cfg = SystemConfig.reference(M=2, U=2, N_t=4, beta_s=1.0, seed=8)
    ds = generate_dataset(cfg, 10, seed=8)
    return cfg, ds


def test_csv_header_and_rows(setup, tmp_path):
    cfg, ds = setup
    report = experiments.compare_baselines(cfg, ds)
    path = tmp_path / "report.csv"
    report.to_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == ("method,beta_s,M,U,mean_sum_rate,mean_sensing_snr,"
                        "mean_sensing_log,mean_objective,n_samples")
    assert len(lines) == 4
    methods = [ln.split(",")[0] for ln in lines[1:]]
    assert methods == ["wmmse", "cb-comm", "cb-sense"]
    for ln in lines[1:]:
        cols = ln.split(",")
        assert cols[1:4] == ["1", "2", "2"]
        assert cols[-1] == "10"


def test_baseline_ordering(setup):
    cfg, ds = setup
    report = experiments.compare_baselines(cfg, ds)
    by_method = {r.method: r for r in report.rows}
    # WMMSE dominates conjugate beamforming on sum rate; CB-sense on SNR
    assert by_method["wmmse"].mean_sum_rate > by_method["cb-comm"].mean_sum_rate
    assert by_method["cb-sense"].mean_sensing_snr > \
        by_method["wmmse"].mean_sensing_snr
    assert by_method["cb-sense"].mean_sum_rate == 0.0


def test_sidecar_json(setup, tmp_path):
    cfg, ds = setup
    report = experiments.compare_baselines(cfg, ds)
    path = tmp_path / "report.json"
    report.write_sidecar(path)
    meta = json.loads(path.read_text())
    assert meta["config"]["M"] == 2
    assert meta["n_samples"] == 10


def test_unknown_method_rejected(setup):
    cfg, ds = setup
    with pytest.raises(ConfigError):
        experiments.baseline_row("zero-forcing", cfg, ds)


def test_report_bytes_are_deterministic(setup, tmp_path):
    cfg, ds = setup
    experiments.compare_baselines(cfg, ds).to_csv(tmp_path / "a.csv")
    experiments.compare_baselines(cfg, ds).to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_scale_aps(setup, tmp_path):
    cfg, ds = setup
    hyper = gnn.GnnHyperparams(depth=1, hidden=4)
    params = gnn.init_parameters(hyper, cfg.N_t, np.random.default_rng(0))
    ckpt = tmp_path / "m.ckpt"
    gnn.save_checkpoint(ckpt, params)
    report = experiments.scale_aps(cfg, ckpt, [2, 3], test_count=5,
                                   with_wmmse=False)
    assert [r.M for r in report.rows] == [2, 3]
    for r in report.rows:
        assert r.method == "gnn"
        assert r.n_samples == 5
    # per-AP budget rescales to keep unit total power
    assert report.metadata["experiment"] == "scale_aps"


def test_scale_aps_antenna_mismatch(setup, tmp_path):
    cfg, _ = setup
    hyper = gnn.GnnHyperparams(depth=1, hidden=4)
    params = gnn.init_parameters(hyper, cfg.N_t + 2, np.random.default_rng(0))
    ckpt = tmp_path / "m.ckpt"
    gnn.save_checkpoint(ckpt, params)
    with pytest.raises(ConfigError):
        experiments.scale_aps(cfg, ckpt, [2])


def test_sweep_beta_caches_checkpoints(setup, tmp_path):
    cfg, ds = setup
    tcfg = training.TrainConfig(batch_size=5, epochs=1, train_samples=10,
                                test_samples=10)
    hyper = gnn.GnnHyperparams(depth=1, hidden=4)
    report = experiments.sweep_beta(cfg, [0.0, 2.0], tcfg, ds, ds,
                                    workdir=tmp_path, hyper=hyper)
    assert (tmp_path / "gnn_beta0.ckpt").exists()
    assert (tmp_path / "gnn_beta2.ckpt").exists()
    methods = [r.method for r in report.rows]
    assert methods == ["gnn", "gnn", "wmmse", "cb-comm", "cb-sense"]
    betas = [r.beta_s for r in report.rows[:2]]
    assert betas == [0.0, 2.0]
    # second run reuses the checkpoints (hashes identical)
    again = experiments.sweep_beta(cfg, [0.0, 2.0], tcfg, ds, ds,
                                   workdir=tmp_path, hyper=hyper)
    assert again.metadata["checkpoints"] == report.metadata["checkpoints"]


def test_replace_beta(setup):
    cfg, _ = setup
    other = experiments.replace_beta(cfg, 7.5)
    assert other.beta_s == 7.5
    assert other.M == cfg.M and other.P == cfg.P
