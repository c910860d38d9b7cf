"""Command-line entry point.

Subcommands: gen-data, train, baseline, eval, sweep-beta, scale-aps.
Configuration is a single JSON document mirroring the SystemConfig and
TrainConfig field names; command-line flags override file values. Exit codes:
0 success, 2 usage/config error, 3 I/O error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

__version__ = "0.1.0"

SYSTEM_FIELDS = ("M", "U", "Q", "N_t", "N_r", "P", "sigma2_c", "sigma2_r",
                 "beta_s", "seed")
TRAIN_FIELDS = ("learning_rate", "batch_size", "epochs", "beta1", "beta2",
                "adam_eps", "train_samples", "test_samples", "seed")
HYPER_FIELDS = ("depth", "hidden", "slope")


def _set_thread_env(argv):
    """Honor --threads before numpy is imported anywhere."""
    n = None
    for i, a in enumerate(argv):
        if a == "--threads" and i + 1 < len(argv):
            n = argv[i + 1]
        elif a.startswith("--threads="):
            n = a.split("=", 1)[1]
    if n is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ[var] = str(n)


def load_config(path, overrides=None):
    """(SystemConfig, TrainConfig, GnnHyperparams) from a JSON document."""
    from .gnn import GnnHyperparams
    from .system import ConfigError, SystemConfig
    from .training import TrainConfig

    doc = {}
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    doc = dict(doc)
    for key, value in (overrides or {}).items():
        if value is not None:
            doc[key] = value
    unknown = set(doc) - set(SYSTEM_FIELDS) - set(TRAIN_FIELDS) - set(HYPER_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "seed" not in doc and "CFISAC_SEED" in os.environ:
        doc["seed"] = int(os.environ["CFISAC_SEED"])
    sys_cfg = SystemConfig(**{k: doc[k] for k in SYSTEM_FIELDS if k in doc})
    train_cfg = TrainConfig(**{k: doc[k] for k in TRAIN_FIELDS if k in doc})
    hyper = GnnHyperparams(**{k: doc[k] for k in HYPER_FIELDS if k in doc})
    return sys_cfg, train_cfg, hyper


class Manifest:
    """Run record: resolved configuration, paths, seeds, version, timings."""

    def __init__(self, out_dir, command, payload):
        self.path = os.path.join(out_dir, "manifest.json")
        self.doc = {"command": command, "tool_version": __version__,
                    "status": "started", "started_unix": time.time()}
        self.doc.update(payload)
        os.makedirs(out_dir, exist_ok=True)
        self._write()

    def _write(self):
        with open(self.path, "w") as fh:
            json.dump(self.doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def finalize(self, **extra):
        self.doc.update(extra)
        self.doc["status"] = "completed"
        self.doc["wall_clock_s"] = time.time() - self.doc["started_unix"]
        self._write()


def cmd_gen_data(args):
    from .data import write_dataset, generate_dataset
    from .experiments import config_dict

    cfg, _, _ = load_config(args.config, {"seed": args.seed})
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    manifest = Manifest(out_dir, "gen-data",
                        {"config": config_dict(cfg), "count": args.count,
                         "seed": cfg.seed, "out": os.path.abspath(args.out)})
    ds = generate_dataset(cfg, args.count, seed=cfg.seed)
    write_dataset(args.out, cfg, ds)
    manifest.finalize()
    return 0


def cmd_train(args):
    from . import gnn, training
    from .data import read_dataset
    from .experiments import config_dict, replace_beta

    cfg, tcfg, hyper = load_config(args.config, {
        "beta_s": args.beta, "epochs": args.epochs, "seed": args.seed})
    train_ds = read_dataset(args.data)
    test_ds = read_dataset(args.test)
    train_ds.check_config(cfg)
    test_ds.check_config(cfg)
    manifest = Manifest(args.out, "train", {
        "config": config_dict(cfg), "train_config": vars_of(tcfg),
        "hyper": {"depth": hyper.depth, "hidden": hyper.hidden,
                  "slope": hyper.slope},
        "beta_s": cfg.beta_s, "data": os.path.abspath(args.data),
        "test": os.path.abspath(args.test)})
    params, history = training.train(cfg, tcfg, train_ds, test_ds,
                                     hyper=hyper, out_dir=args.out,
                                     log=_logger(args))
    manifest.finalize(steps=len(history))
    return 0


def cmd_baseline(args):
    from .data import read_dataset
    from .experiments import (ExperimentReport, baseline_row, config_dict)

    cfg, _, _ = load_config(args.config)
    ds = read_dataset(args.data)
    ds.check_config(cfg)
    manifest = Manifest(args.out, "baseline",
                        {"config": config_dict(cfg), "method": args.method,
                         "data": os.path.abspath(args.data)})
    report = ExperimentReport(rows=[baseline_row(args.method, cfg, ds)],
                              metadata={"experiment": "baseline",
                                        "method": args.method,
                                        "config": config_dict(cfg),
                                        "n_samples": len(ds)})
    report.to_csv(os.path.join(args.out, "report.csv"))
    report.write_sidecar(os.path.join(args.out, "report.json"))
    manifest.finalize()
    return 0


def cmd_eval(args):
    from . import gnn
    from .data import read_dataset
    from .experiments import (ExperimentReport, _gnn_row, checkpoint_hash,
                              config_dict)

    cfg, _, _ = load_config(args.config)
    ds = read_dataset(args.data)
    ds.check_config(cfg)
    params, _ = gnn.load_checkpoint(args.ckpt)
    if params.n_t != cfg.N_t:
        from .system import ConfigError
        raise ConfigError(f"checkpoint N_t={params.n_t} does not match "
                          f"config N_t={cfg.N_t}")
    manifest = Manifest(args.out, "eval",
                        {"config": config_dict(cfg),
                         "ckpt": os.path.abspath(args.ckpt),
                         "ckpt_hash": checkpoint_hash(args.ckpt),
                         "data": os.path.abspath(args.data)})
    report = ExperimentReport(rows=[_gnn_row("gnn", params, cfg, ds)],
                              metadata={"experiment": "eval",
                                        "config": config_dict(cfg),
                                        "checkpoint": checkpoint_hash(args.ckpt),
                                        "n_samples": len(ds)})
    report.to_csv(os.path.join(args.out, "report.csv"))
    report.write_sidecar(os.path.join(args.out, "report.json"))
    manifest.finalize()
    return 0


def cmd_sweep_beta(args):
    from .data import read_dataset
    from .experiments import config_dict, sweep_beta

    cfg, tcfg, hyper = load_config(args.config)
    beta_list = _parse_list(args.beta_list, float)
    train_ds = read_dataset(args.data)
    test_ds = read_dataset(args.test)
    train_ds.check_config(cfg)
    test_ds.check_config(cfg)
    manifest = Manifest(args.out, "sweep-beta",
                        {"config": config_dict(cfg), "beta_list": beta_list,
                         "train_config": vars_of(tcfg)})
    report = sweep_beta(cfg, beta_list, tcfg, train_ds, test_ds,
                        workdir=args.out, hyper=hyper, log=_logger(args))
    report.to_csv(os.path.join(args.out, "report.csv"))
    report.write_sidecar(os.path.join(args.out, "report.json"))
    manifest.finalize()
    return 0


def cmd_scale_aps(args):
    from .experiments import config_dict, scale_aps

    cfg, _, _ = load_config(args.config)
    m_list = _parse_list(args.m_list, int)
    manifest = Manifest(args.out, "scale-aps",
                        {"config": config_dict(cfg), "m_list": m_list,
                         "ckpt": os.path.abspath(args.ckpt),
                         "count": args.count, "seed": args.seed})
    report = scale_aps(cfg, args.ckpt, m_list, test_count=args.count,
                       seed=args.seed, with_wmmse=not args.no_wmmse)
    report.to_csv(os.path.join(args.out, "report.csv"))
    report.write_sidecar(os.path.join(args.out, "report.json"))
    manifest.finalize()
    return 0


def _parse_list(text, cast):
    try:
        return [cast(x) for x in text.split(",") if x != ""]
    except ValueError:
        from .system import ConfigError
        raise ConfigError(f"cannot parse list {text!r}")


def vars_of(tcfg):
    return {k: getattr(tcfg, k) for k in TRAIN_FIELDS}


def _logger(args):
    if getattr(args, "quiet", False):
        return None
    return lambda msg: print(msg, file=sys.stderr)


def build_parser():
    ap = argparse.ArgumentParser(prog="cfisac",
                                 description="cell-free ISAC beamforming lab")
    ap.add_argument("--threads", type=int, default=None,
                    help="bound internal parallelism (1 = bit-reproducible)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a channel dataset")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the GNN beamformer")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("baseline", help="evaluate a classical beamformer")
    p.add_argument("--method", required=True,
                   choices=["wmmse", "cb-comm", "cb-sense"])
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", help="evaluate a trained checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-beta", help="trade-off sweep over sensing weights")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--beta-list", default="0,0.5,1,2,5,10")
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_sweep_beta)

    p = sub.add_parser("scale-aps", help="evaluate a checkpoint at other AP counts")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--m-list", default="3,4,5,6,7,8")
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--seed", type=int, default=9000)
    p.add_argument("--no-wmmse", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scale_aps)
    return ap


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    _set_thread_env(argv)
    parser = build_parser()
    args = parser.parse_args(argv)

    from .data import DatasetCorruptionError, DatasetFormatError
    from .gnn import CheckpointError
    from .system import ConfigError
    from .training import TrainingDivergence
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DatasetFormatError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDivergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (OSError, DatasetCorruptionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
