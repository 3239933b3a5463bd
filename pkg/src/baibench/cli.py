"""
Command-line surface: run experiments (simulate), turn PoE tables into rate
tables (rates), and execute the theory-check suites (check).

Exit codes: 0 success, 2 usage/config error, 3 I/O failure, 4 check failure.
All artifacts are written inside the chosen output location; CSVs are UTF-8
with LF line endings and full round-trip float precision, so identical
manifest inputs reproduce them byte for byte.
"""

import argparse
import configparser
import csv
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from typing import Dict, List, Optional, Sequence

from . import __version__
from .algorithms import ALGORITHM_KINDS, AlgorithmConfig, ConfigError
from .checks import SUITES, run_suite
from .instances import REGISTRY
from .model import DegenerateInstanceError, h1, h2
from .simulation import RNG_METHOD, ExperimentConfig, estimate_poe, minimax_rate, rate_bounds

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_CHECK = 4

POE_COLUMNS = [
    "algorithm", "instance", "t", "errors", "replications", "poe", "ci_low", "ci_high", "seed",
]
RATE_COLUMNS = ["algorithm", "instance", "t", "measure", "rate_lower", "rate_plugin", "rate_upper"]


class CliError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def _fmt(value) -> str:
    """Full round-trip decimal formatting; counts stay plain integers."""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return repr(value)
    return str(value)


def _parse_experiment(path: str):
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise CliError(f"config file not found: {path}", EXIT_IO)
    if "experiment" not in parser:
        raise CliError("config needs an [experiment] section", EXIT_CONFIG)
    exp = parser["experiment"]

    raw_instances = exp.get("instances", exp.get("instance", ""))
    instance_ids = raw_instances.replace(",", " ").split()
    if not instance_ids:
        raise CliError("experiment must name at least one instance", EXIT_CONFIG)
    for iid in instance_ids:
        if iid not in REGISTRY:
            raise CliError(f"unknown instance id {iid!r}", EXIT_CONFIG)

    algorithms: Dict[str, AlgorithmConfig] = {}
    for section in parser.sections():
        if not section.startswith("algorithm."):
            if section != "experiment":
                raise CliError(f"unknown config section [{section}]", EXIT_CONFIG)
            continue
        name = section.split(".", 1)[1]
        block = parser[section]
        kind = block.get("kind", name)
        if kind not in ALGORITHM_KINDS:
            raise CliError(f"unknown algorithm kind {kind!r} in [{section}]", EXIT_CONFIG)
        try:
            algorithms[name] = AlgorithmConfig(
                kind=kind,
                budget=block.getint("budget", fallback=None),
                batch=block.getint("batch", fallback=None),
                c_suf=block.getfloat("c_suf", fallback=0.999),
                recompute=block.getint("recompute", fallback=1),
                initial_budget=block.getint("initial_budget", fallback=None),
                batches=block.getint("batches", fallback=None),
            )
        except (ConfigError, ValueError) as exc:
            raise CliError(f"bad algorithm config in [{section}]: {exc}", EXIT_CONFIG)
    if not algorithms:
        raise CliError("config needs at least one [algorithm.<name>] section", EXIT_CONFIG)

    try:
        budget = exp.getint("budget", fallback=None)
        replications = exp.getint("replications", fallback=1)
        seed = exp.getint("seed", fallback=0)
        workers = exp.getint("workers", fallback=None)
        checkpoints = (
            [int(x) for x in exp.get("checkpoints").replace(",", " ").split()]
            if exp.get("checkpoints", fallback=None)
            else None
        )
    except ValueError as exc:
        raise CliError(f"bad experiment value: {exc}", EXIT_CONFIG)
    return instance_ids, algorithms, budget, replications, seed, workers, checkpoints


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_csv(path: str, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def cmd_simulate(args) -> int:
    instance_ids, algorithms, budget, replications, seed, workers, checkpoints = (
        _parse_experiment(args.config)
    )
    if args.seed is not None:
        seed = args.seed
    if args.replications is not None:
        replications = args.replications
    if args.checkpoints:
        checkpoints = [int(x) for x in args.checkpoints.replace(",", " ").split()]
    n_workers = _resolve_workers(args, workers)

    # validate everything up front: a bad config must not leave partial files
    configs: Dict[str, ExperimentConfig] = {}
    for iid in instance_ids:
        cfg = ExperimentConfig(
            instance=iid,
            algorithms=algorithms,
            budget=budget if budget is not None else REGISTRY[iid].default_budget,
            replications=replications,
            seed=seed,
            checkpoints=checkpoints,
            workers=n_workers,
        )
        try:
            cfg.validate()
        except (ConfigError, DegenerateInstanceError, KeyError, ValueError) as exc:
            raise CliError(f"invalid experiment for instance {iid}: {exc}", EXIT_CONFIG)
        configs[iid] = cfg

    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory: {exc}", EXIT_IO)

    manifest = {
        "tool": "baibench",
        "version": __version__,
        "command": "simulate",
        "master_seed": seed,
        "rng": RNG_METHOD,
        "started": _now(),
        "config": {
            "instances": instance_ids,
            "budget": budget,
            "replications": replications,
            "workers": n_workers,
            "checkpoints": checkpoints,
            "algorithms": {
                name: {k: v for k, v in dataclasses.asdict(a).items() if v is not None}
                for name, a in algorithms.items()
            },
        },
        "outputs": {},
    }

    try:
        for iid, cfg in configs.items():
            curves = estimate_poe(cfg, workers=n_workers)
            for name, curve in curves.items():
                rows = [
                    [
                        name, iid, int(t), int(e), curve.replications,
                        float(p), float(lo), float(hi), seed,
                    ]
                    for t, e, p, lo, hi in zip(
                        curve.t, curve.errors, curve.poe, curve.ci_low, curve.ci_high
                    )
                ]
                filename = f"poe_{iid}_{name}.csv"
                path = os.path.join(args.out, filename)
                _write_csv(path, POE_COLUMNS, rows)
                manifest["outputs"][filename] = _sha256(path)
        manifest["finished"] = _now()
        with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise CliError(f"failed writing outputs: {exc}", EXIT_IO)
    return EXIT_OK


def _read_poe_csvs(paths: Sequence[str]):
    rows = []
    for path in paths:
        try:
            with open(path, "r", encoding="utf-8", newline="") as fh:
                reader = csv.DictReader(fh)
                missing = [c for c in POE_COLUMNS if c not in (reader.fieldnames or [])]
                if missing:
                    raise CliError(
                        f"{path}: missing column(s) {', '.join(missing)}", EXIT_CONFIG
                    )
                for record in reader:
                    rows.append(record)
        except OSError as exc:
            raise CliError(f"cannot read {path}: {exc}", EXIT_IO)
    if not rows:
        raise CliError("no PoE rows found", EXIT_CONFIG)
    return rows


def cmd_rates(args) -> int:
    rows = _read_poe_csvs(args.csvs)
    measure_fn = {"h1": h1, "h2": h2}[args.measure]

    # final checkpoint per (instance, algorithm)
    final: Dict[tuple, dict] = {}
    for record in rows:
        key = (record["instance"], record["algorithm"])
        if key not in final or int(record["t"]) > int(final[key]["t"]):
            final[key] = record
    instances = sorted({k[0] for k in final})
    algorithms = sorted({k[1] for k in final})
    for iid in instances:
        ts = {int(final[(iid, a)]["t"]) for a in algorithms if (iid, a) in final}
        if len(ts) != 1:
            raise CliError(f"instance {iid}: algorithms disagree on the final t", EXIT_CONFIG)
        if any((iid, a) not in final for a in algorithms):
            raise CliError(f"instance {iid}: missing algorithm coverage", EXIT_CONFIG)

    out_rows = []
    per_algorithm: Dict[str, List[float]] = {a: [] for a in algorithms}
    for iid in instances:
        try:
            h_val = measure_fn(REGISTRY[iid].build().means)
        except KeyError:
            raise CliError(f"unknown instance id {iid!r} in CSV", EXIT_CONFIG)
        for a in algorithms:
            record = final[(iid, a)]
            t = int(record["t"])
            lower, plugin, upper = rate_bounds(
                float(record["ci_low"]), float(record["poe"]), float(record["ci_high"]),
                h_val, t,
            )
            per_algorithm[a].append(plugin)
            out_rows.append([a, iid, t, args.measure, lower, plugin, upper])
    for a in algorithms:
        out_rows.append([a, "minimax", "", args.measure, "", minimax_rate(per_algorithm[a]), ""])

    try:
        _write_csv(args.out, RATE_COLUMNS, out_rows)
    except OSError as exc:
        raise CliError(f"failed writing {args.out}: {exc}", EXIT_IO)
    return EXIT_OK


def cmd_check(args) -> int:
    if args.suite not in SUITES:
        raise CliError(f"unknown suite {args.suite!r}", EXIT_CONFIG)
    results = run_suite(
        args.suite,
        samples=args.samples,
        sr_replications=args.sr_replications,
        seed=args.seed if args.seed is not None else 0,
        workers=_resolve_workers(args, None),
        perturb_d=0.5 if args.inject_fault else 0.0,
    )
    report = [dataclasses.asdict(r) for r in results]
    for r in results:
        value = "" if r.value is None else f" value={_fmt(float(r.value))}"
        print(f"{r.status.upper():12s} {r.name}{value}")
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                json.dump(report, fh, indent=2, sort_keys=True, default=_json_default)
                fh.write("\n")
        except OSError as exc:
            raise CliError(f"failed writing {args.out}: {exc}", EXIT_IO)
    return EXIT_CHECK if any(r.failed for r in results) else EXIT_OK


def _json_default(obj):
    try:
        return obj.tolist()
    except AttributeError:
        return str(obj)


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _resolve_workers(args, config_hint: Optional[int]) -> int:
    if getattr(args, "workers", None) is not None:
        return args.workers
    env = os.environ.get("BAIBENCH_WORKERS")
    if env:
        return int(env)
    if config_hint is not None:
        return config_hint
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="baibench",
        description="Benchmark harness for fixed-budget / anytime best arm identification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte-Carlo experiment from a config file")
    sim.add_argument("--config", required=True, help="experiment config (INI sections)")
    sim.add_argument("--out", required=True, help="output directory for CSVs and manifest")
    sim.add_argument("--seed", type=int, default=None, help="override the master seed")
    sim.add_argument("--workers", type=int, default=None, help="worker process count")
    sim.add_argument(
        "--replications", type=int, default=None, help="override the replication count"
    )
    sim.add_argument(
        "--checkpoints", default=None, help="override checkpoints (space/comma separated)"
    )
    sim.set_defaults(func=cmd_simulate)

    rates = sub.add_parser("rates", help="build a rate table from PoE CSVs")
    rates.add_argument("csvs", nargs="+", help="PoE CSV files from `simulate`")
    rates.add_argument("--measure", choices=["h1", "h2"], default="h1")
    rates.add_argument("--out", required=True, help="output CSV path")
    rates.set_defaults(func=cmd_rates)

    check = sub.add_parser("check", help="run theory-check suites")
    check.add_argument("--suite", default="all", choices=list(SUITES))
    check.add_argument("--out", default=None, help="JSON report path")
    check.add_argument("--samples", type=int, default=10000)
    check.add_argument("--sr-replications", type=int, default=100000, dest="sr_replications")
    check.add_argument("--seed", type=int, default=None)
    check.add_argument("--workers", type=int, default=None)
    check.add_argument(
        "--inject-fault",
        action="store_true",
        help="debug: perturb D inside the allocation checks (must fail)",
    )
    check.set_defaults(func=cmd_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
