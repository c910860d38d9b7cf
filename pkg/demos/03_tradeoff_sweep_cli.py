"""Drive the command-line interface: dataset, sweep, AP scaling.

Everything here shells out to the `cfisac` CLI exactly the way a batch job
would, using a small configuration so the sweep finishes in a couple of
minutes. Artifacts (datasets, checkpoints, report.csv files, manifests) land
in ./demo_out.

    python3 demos/03_tradeoff_sweep_cli.py
"""

import json
import pathlib
import subprocess
import sys

OUT = pathlib.Path("demo_out")
OUT.mkdir(exist_ok=True)

config = {
    "M": 3, "U": 2, "N_t": 4, "P": 1 / 3, "beta_s": 0.0,
    "hidden": 32, "depth": 2,
    "epochs": 6, "batch_size": 64, "learning_rate": 1e-3,
    "train_samples": 1500, "test_samples": 100, "seed": 0,
}
(OUT / "config.json").write_text(json.dumps(config, indent=2))


def cli(*args):
    cmd = [sys.executable, "-m", "cfisac.cli", "--threads", "1", *map(str, args)]
    print("+", " ".join(cmd[3:]))
    subprocess.run(cmd, check=True)


cli("gen-data", "--config", OUT / "config.json",
    "--out", OUT / "train.bin", "--count", config["train_samples"])
cli("gen-data", "--config", OUT / "config.json", "--seed", 99,
    "--out", OUT / "test.bin", "--count", config["test_samples"])

# one model per sensing weight, then the three baselines, all in report.csv
cli("sweep-beta", "--config", OUT / "config.json",
    "--data", OUT / "train.bin", "--test", OUT / "test.bin",
    "--beta-list", "0,2", "--out", OUT / "sweep", "--quiet")
print("\n" + (OUT / "sweep" / "report.csv").read_text())

# reuse the beta_s = 2 checkpoint at other AP counts without retraining
cli("scale-aps", "--ckpt", OUT / "sweep" / "gnn_beta2.ckpt",
    "--config", OUT / "config.json", "--m-list", "2,3,4", "--count", "50",
    "--no-wmmse", "--out", OUT / "scale")
print("\n" + (OUT / "scale" / "report.csv").read_text())

print("done; inspect demo_out/ for manifests and checkpoints")
