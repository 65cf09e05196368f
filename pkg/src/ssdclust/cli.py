"""
Command-line driver.

    ssdclust distances --generate mohmm --n 100 --mean-length 200 --out run/
    ssdclust cluster --input data.csv --method ssd --C 6 --K 20 --out run/
    ssdclust segment --generate regimes --W 10 --K 3 --out run/
    ssdclust benchmark-mohmm --mean-lengths 25,50,100 --out run/

Options may also come from a JSON file given with ``--config``; flags on the
command line win. Exit status: 0 success, 2 invalid input, 3 I/O failure,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, hmm
from . import io as sio
from .data import MoHMMConfig, generate_control_charts, generate_mohmm, generate_regimes
from .data import load_sequences
from .experiments import METHODS, benchmark_mohmm, compute_distances, derive_seeds
from .experiments import run_clustering, run_segmentation
from .hmm import TrainConfig
from .spectral import spectral_cluster
from .evaluation import clustering_accuracy
from .ssd import SSDOptions

log = logging.getLogger("ssdclust")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERICAL = 0, 2, 3, 4

DEFAULTS = {
    "method": "ssd",
    "K": 4,
    "Km": 2,
    "C": 2,
    "max_iters": 200,
    "tol": 1e-6,
    "restarts": 5,
    "variance_floor": 1e-6,
    "seed": 0,
    "strip_self": False,
    "power": 1,
    "epsilon": 1e-6,
    "kl_subset": None,
    "repetitions": 1,
    "kmeans_runs": 10,
    "jobs": 1,
    "generate": None,
    "n": 100,
    "mean_length": 100,
    "n_per_class": 100,
    "length": 50,
    "input": None,
    "distances": None,
    "W": 10,
    "mean_lengths": "25,50,100,200,400",
    "methods": ",".join(METHODS),
    "out": ".",
}


class UsageError(ValueError):
    pass


def _common(p: argparse.ArgumentParser, data=True):
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--out", help="output directory (default: current directory)")
    p.add_argument("--seed", type=int, help="root seed")
    p.add_argument("--jobs", type=int, help="parallel jobs for per-sequence training")
    p.add_argument("--K", type=int, help="states of the global SSD model")
    p.add_argument("--Km", type=int, help="states per sequence model (baselines)")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--tol", type=float, help="relative log-likelihood tolerance")
    p.add_argument("--restarts", type=int)
    p.add_argument("--variance-floor", dest="variance_floor", type=float)
    p.add_argument("--strip-self", dest="strip_self", action="store_const", const=True)
    p.add_argument("--power", type=int, help="diffusion power of induced matrices")
    p.add_argument("--epsilon", type=float, help="row smoothing of induced matrices")
    p.add_argument("--kl-subset", dest="kl_subset", type=int)
    if data:
        p.add_argument("--input", help="sequence CSV file")
        p.add_argument("--generate", choices=["mohmm", "control-chart", "regimes"])
        p.add_argument("--n", type=int, help="number of generated sequences")
        p.add_argument("--mean-length", dest="mean_length", type=int)
        p.add_argument("--n-per-class", dest="n_per_class", type=int)
        p.add_argument("--length", type=int, help="samples per generated regime")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssdclust", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distances", help="compute a distance matrix")
    _common(p)
    p.add_argument("--method", choices=METHODS)

    p = sub.add_parser("cluster", help="spectral clustering, repeated and scored")
    _common(p)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--distances", help="precomputed matrix (.csv or .json)")
    p.add_argument("--C", type=int, help="number of clusters")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--kmeans-runs", dest="kmeans_runs", type=int)

    p = sub.add_parser("segment", help="spectral segmentation of windowed data")
    _common(p)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--W", type=int, help="window length")
    p.add_argument("--C", type=int, help="number of segments (default: number of labels)")

    p = sub.add_parser("benchmark-mohmm", help="error versus mean length on MoHMM data")
    _common(p, data=False)
    p.add_argument("--mean-lengths", dest="mean_lengths")
    p.add_argument("--methods")
    p.add_argument("--n", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--kmeans-runs", dest="kmeans_runs", type=int)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the optional config file and explicit flags."""
    explicit = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            explicit.update(json.load(fh))
        unknown = set(explicit) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    explicit.update({k: v for k, v in vars(args).items() if v is not None and k != "config"})
    cfg = dict(DEFAULTS)
    if args.command == "segment":
        # segments default to the number of distinct labels
        cfg["C"] = None
    cfg.update(explicit)
    return cfg


def _train_config(cfg) -> TrainConfig:
    return TrainConfig(cfg["max_iters"], cfg["tol"], cfg["restarts"], cfg["seed"],
                       cfg["variance_floor"])


def _options(cfg) -> SSDOptions:
    return SSDOptions(bool(cfg["strip_self"]), cfg["power"], cfg["epsilon"])


def _dataset_factory(cfg):
    if cfg["input"]:
        ds = load_sequences(cfg["input"])
        return lambda _seed: ds
    if cfg["generate"] == "mohmm":
        return lambda seed: generate_mohmm(MoHMMConfig(cfg["n"], cfg["mean_length"], seed))
    if cfg["generate"] == "control-chart":
        return lambda seed: generate_control_charts(cfg["n_per_class"], seed=seed)
    if cfg["generate"] == "regimes":
        return lambda seed: generate_regimes(cfg["length"], seed=seed)
    raise UsageError("give --input FILE or --generate")


def _base_metadata(cfg, command) -> dict:
    return {
        "command": command,
        "package_version": __version__,
        "format_versions": {"matrix": sio.FORMAT_VERSION, "model": hmm.FORMAT_VERSION},
        "config": {k: v for k, v in cfg.items() if k not in ("command", "verbose")},
    }


def _validate(cfg):
    if cfg["K"] < 1 or cfg["Km"] < 1:
        raise UsageError("K and Km must be positive")
    if cfg["repetitions"] < 1:
        raise UsageError("repetitions must be positive")
    _train_config(cfg)
    _options(cfg)


def cmd_distances(cfg) -> dict:
    t0 = time.perf_counter()
    seeds = derive_seeds(cfg["seed"], 0)
    ds = _dataset_factory(cfg)(seeds.data)
    method = cfg["method"]
    train = _train_config(cfg)
    mats, meta = compute_distances(ds, [method], cfg["K"], cfg["Km"], train, _options(cfg),
                                   cfg["kl_subset"], cfg["jobs"])
    out = Path(cfg["out"])
    D = mats[method]
    m = meta[method]
    metadata = _base_metadata(cfg, "distances") | {
        "method": method,
        "n": len(ds),
        "seeds": asdict(seeds),
        "counters": {
            "fb_count": m.get("fb_count", 0),
            "likelihood_count": m.get("likelihood_count", 0),
        },
        "distance_metadata": m,
        "wall_time": time.perf_counter() - t0,
    }
    sio.save_matrix_csv(D, out / "distances.csv")
    # the matrix container stays byte-identical across reruns: no timings
    stable = {k: v for k, v in metadata.items() if k != "wall_time"}
    stable["config"] = {k: v for k, v in cfg.items() if k not in ("command", "verbose", "out")}
    stable["distance_metadata"] = {k: v for k, v in m.items() if k != "wall_time"}
    sio.save_matrix_json(D, out / "distances.json", stable)
    if ds.labels is not None:
        sio.save_labels_csv(ds.labels, out / "true_labels.csv")
    sio.save_report(metadata, out / "metadata.json")
    return metadata


def cmd_cluster(cfg) -> dict:
    C = cfg["C"]
    if C is None or C < 2:
        raise UsageError("clustering needs C >= 2")
    out = Path(cfg["out"])
    if cfg["distances"]:
        D, dmeta = sio.load_matrix(cfg["distances"])
        truth = load_sequences(cfg["input"]).labels if cfg["input"] else None
        runs = []
        for r in range(cfg["repetitions"]):
            seeds = derive_seeds(cfg["seed"], r)
            a = spectral_cluster(D, C, cfg["kmeans_runs"], seeds.cluster)
            rec = {"repetition": r, "labels": a.labels, "seeds": asdict(seeds), **a.report()}
            if truth is not None:
                rec.update(clustering_accuracy(a.labels, truth).to_dict())
            runs.append(rec)
        summary = {"method": dmeta.get("method", "precomputed"), "C": C,
                   "repetitions": cfg["repetitions"]}
        if truth is not None:
            acc = np.array([r["accuracy"] for r in runs])
            summary.update(mean_accuracy=float(acc.mean()), std_accuracy=float(acc.std()),
                           mean_error=float(100 - acc.mean()))
        result = {"summary": summary, "runs": runs}
    else:
        result = run_clustering(
            _dataset_factory(cfg), cfg["method"], C, cfg["repetitions"], cfg["seed"],
            cfg["K"], cfg["Km"], _train_config(cfg), _options(cfg), cfg["kmeans_runs"],
            cfg["jobs"],
        )
    for rec in result["runs"]:
        sio.save_labels_csv(rec.pop("labels"), out / f"labels_rep{rec['repetition']}.csv")
    report = _base_metadata(cfg, "cluster") | result
    sio.save_report(report, out / "report.json")
    return report


def cmd_segment(cfg) -> dict:
    factory = _dataset_factory(cfg)
    seeds = derive_seeds(cfg["seed"], 0)
    ds = factory(seeds.data)
    total = sum(s.shape[0] for s in ds.sequences)
    if cfg["W"] > total:
        raise UsageError(f"window length {cfg['W']} exceeds total length {total}")
    train = _train_config(cfg)
    res = run_segmentation(ds, cfg["W"], cfg["C"], cfg["method"], cfg["K"], cfg["Km"], train,
                           _options(cfg))
    out = Path(cfg["out"])
    sio.save_labels_csv(res.pop("labels"), out / "segmentation.csv", header="segment")
    report = _base_metadata(cfg, "segment") | {"seeds": asdict(seeds)} | res
    sio.save_report(report, out / "report.json")
    return report


def cmd_benchmark_mohmm(cfg) -> dict:
    mus = [int(x) for x in str(cfg["mean_lengths"]).split(",") if x.strip()]
    methods = [m.strip().lower() for m in str(cfg["methods"]).split(",") if m.strip()]
    bad = set(methods) - set(METHODS)
    if bad or not methods:
        raise UsageError(f"unknown methods: {sorted(bad)}")
    if any(mu < 5 for mu in mus) or not mus:
        raise UsageError("mean lengths must be >= 5")

    def progress(mu, r, errs):
        log.info("mean_length=%d rep=%d %s", mu, r, errs)

    t0 = time.perf_counter()
    rows = benchmark_mohmm(mus, methods, cfg["n"], cfg["repetitions"], cfg["seed"], cfg["K"],
                           cfg["Km"], _train_config(cfg), _options(cfg), cfg["kmeans_runs"],
                           cfg["jobs"], progress)
    out = Path(cfg["out"])
    with open(out / "benchmark.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    report = _base_metadata(cfg, "benchmark-mohmm") | {
        "rows": rows, "wall_time": time.perf_counter() - t0
    }
    sio.save_report(report, out / "report.json")
    return report


COMMANDS = {
    "distances": cmd_distances,
    "cluster": cmd_cluster,
    "segment": cmd_segment,
    "benchmark-mohmm": cmd_benchmark_mohmm,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve(args)
        _validate(cfg)
        Path(cfg["out"]).mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg)
    except (hmm.DegenerateModelError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"ssdclust: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, TypeError) as exc:
        print(f"ssdclust: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"ssdclust: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
