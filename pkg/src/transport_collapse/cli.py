"""Command-line entry point: run, converge, compare, selftest, paths."""
from __future__ import annotations

import argparse
import json
import sys

import yaml

from .config import ConfigError, PathConfig, apply_overrides, load_config
from .experiment import ORACLES, run_experiment
from .paths import TimePartition, delta_z, generate, read_csv, write_csv
from .selftest import SUITES, run_selftest


def _experiment_parser(sub, name: str, help: str):
    p = sub.add_parser(name, help=help)
    p.add_argument("--config", required=True, help="YAML or JSON experiment file")
    p.add_argument("--seed", type=int, help="override the seed")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any field, e.g. grid.nx=512")
    return p


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="transport-collapse", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    _experiment_parser(sub, "run", "single simulation at the first dt")
    _experiment_parser(sub, "converge", "self-convergence study over the dt list")
    cmp_ = _experiment_parser(sub, "compare", "scheme against an independent oracle")
    cmp_.add_argument("--oracle", required=True, choices=ORACLES)
    st = sub.add_parser("selftest", help="invariant suites of every module")
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--suite", action="append", choices=sorted(SUITES))
    pa = sub.add_parser("paths", help="generate or inspect driver paths")
    pa.add_argument("--spec", help="YAML path spec; may also hold T and n_samples")
    pa.add_argument("--out", help="CSV file to write")
    pa.add_argument("--T", type=float)
    pa.add_argument("--n-samples", type=int)
    pa.add_argument("--inspect", help="CSV path to summarise")
    pa.add_argument("--dt", type=float, action="append", default=[], help="partition step for delta_z (inspect)")
    return ap


def _load(args):
    cfg = load_config(args.config)
    over = list(args.set)
    if args.seed is not None:
        over.append(f"seed={args.seed}")
    if args.out is not None:
        over.append(f"output_dir={json.dumps(args.out)}")
    return apply_overrides(cfg, over) if over else cfg


def _paths(args) -> int:
    if args.inspect:
        z = read_csv(args.inspect)
        info = {"samples": len(z.times), "T": z.T, "dimension": z.dim, "final": z.values[-1].tolist()}
        for dt in args.dt:
            info[f"delta_z[dt={dt!r}]"] = delta_z(z, TimePartition.from_dt(z.T, dt))
        print(json.dumps(info, indent=2))
        return 0
    if not (args.spec and args.out):
        print("paths: need --spec and --out, or --inspect", file=sys.stderr)
        return 2
    with open(args.spec, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    T = args.T if args.T is not None else float(data.pop("T", 1.0))
    n = args.n_samples if args.n_samples is not None else int(data.pop("n_samples", 1025))
    data.pop("T", None)
    data.pop("n_samples", None)
    dim = int(data.pop("dimension", 1))
    seed = int(data.pop("default_seed", 0))
    spec = PathConfig.model_validate(data).spec(dim, seed)
    write_csv(generate(spec, T, n), args.out)
    print(args.out)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            checks = run_selftest(args.seed, args.suite)
            for c in checks:
                print(c.line())
            failed = sum(not c.ok for c in checks)
            print(f"{len(checks) - failed}/{len(checks)} checks passed")
            return 1 if failed else 0
        if args.command == "paths":
            return _paths(args)
        cfg = _load(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(json.dumps({"status": 2, "error": {"type": type(exc).__name__, "message": str(exc)}}), file=sys.stderr)
        return 2
    report = run_experiment(cfg, args.command, getattr(args, "oracle", None))
    stream = sys.stdout if report.status == 0 else sys.stderr
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True), file=stream)
    return report.status


if __name__ == "__main__":
    sys.exit(main())
