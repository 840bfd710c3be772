"""anneal-lab command line interface.

Exit codes: 0 success, 1 configuration error, 2 partial point failures.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="anneal-lab",
                                     description="Quantum-signature annealing model suite")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a sweep config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--workers", type=int, default=None,
                       help="parallel workers (default: ANNEAL_LAB_WORKERS or 1)")
    p_run.add_argument("--no-resume", action="store_true")

    p_cmp = sub.add_parser("compare", help="tabulate record files side by side")
    p_cmp.add_argument("files", nargs="+")

    p_stats = sub.add_parser("stats", help="statistics toolchain")
    p_stats.add_argument("test", choices=["binning", "runs", "bootstrap"])
    p_stats.add_argument("file", help="binary series (one 0/1 per line or CSV 'value' column);"
                                      " bootstrap wants CSV 'value,sigma'")
    p_stats.add_argument("--max-bin", type=int, default=None)
    p_stats.add_argument("--n-boot", type=int, default=1000)
    p_stats.add_argument("--seed", type=int, default=0)

    p_spec = sub.add_parser("spectrum", help="gap profile and degeneracy report")
    p_spec.add_argument("--instance", required=True, help="instance JSON file")
    p_spec.add_argument("--schedule", required=True, help="schedule CSV file")
    p_spec.add_argument("--alpha", type=float, default=1.0)
    p_spec.add_argument("--level", type=int, default=None,
                        help="gap level (default 2^(N/2), the first state above the manifold)")
    p_spec.add_argument("--points", type=int, default=64)
    p_spec.add_argument("--out", default=None, help="gap CSV output path")
    p_spec.add_argument("--degeneracy", default=None, help="degeneracy report JSON path")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "run":
        from .runner import SweepConfig, run_sweep

        config = SweepConfig.from_file(args.config)
        failures = run_sweep(config, workers=args.workers, resume=not args.no_resume)
        print(f"wrote {config.output}" + (f" ({failures} failed points)" if failures else ""))
        return 2 if failures else 0

    if args.command == "compare":
        from .runner import compare_models, load_records

        print(compare_models(*[load_records(f) for f in args.files]))
        return 0

    if args.command == "stats":
        return _stats(args)

    if args.command == "spectrum":
        from .instance import ProblemInstance
        from .schedule import read_schedule_csv
        from .spectrum import gap_profile, ground_degeneracy, write_gap_csv

        inst = ProblemInstance.load(args.instance)
        sched = read_schedule_csv(args.schedule)
        level = args.level if args.level is not None else 2 ** (inst.n_spins // 2)
        grid, gaps = gap_profile(inst, sched, args.alpha, level, args.points)
        if args.out:
            write_gap_csv(args.out, grid, gaps, level)
            print(f"wrote {args.out}")
        else:
            print(f"minimum gap to level {level}: {gaps.min():.6g} at s={grid[np.argmin(gaps)]:.4f}")
        if args.degeneracy:
            count, configs = ground_degeneracy(inst)
            with open(args.degeneracy, "w") as fh:
                json.dump({"count": count,
                           "configs": [[int(x) for x in c] for c in configs]}, fh)
            print(f"wrote {args.degeneracy}")
        return 0

    raise ValueError(f"unknown command {args.command}")


def _read_series(path) -> np.ndarray:
    with open(path) as fh:
        first = fh.readline()
        rest = fh.read().splitlines()
    lines = [first.strip()] + [ln.strip() for ln in rest if ln.strip()]
    if lines and lines[0].lower().startswith("value"):
        lines = lines[1:]
    return np.array([float(ln.split(",")[0]) for ln in lines])


def _stats(args) -> int:
    from .stats import binning_test, bootstrap_statistic, runs_test

    if args.test == "bootstrap":
        values, sigmas = [], []
        with open(args.file) as fh:
            header = fh.readline()
            if not header.lower().startswith("value"):
                raise ValueError("bootstrap input needs a CSV header 'value,sigma'")
            for line in fh:
                if line.strip():
                    parts = line.split(",")
                    values.append(float(parts[0]))
                    sigmas.append(float(parts[1]) if len(parts) > 1 else 0.0)
        res = bootstrap_statistic(values, sigmas, n_boot=args.n_boot,
                                  rng=np.random.default_rng(args.seed))
        print(json.dumps({"mean": res.mean, "error_bar": res.error_bar,
                          "ci95": list(res.ci95)}))
        return 0

    series = _read_series(args.file).astype(int)
    if args.test == "binning":
        res = binning_test(series, max_bin=args.max_bin)
        print(json.dumps({"bin_sizes": res.bin_sizes.tolist(),
                          "errors": res.errors.tolist(), "xi": res.xi}))
        return 0
    res = runs_test(series)
    print(json.dumps({"runs": res.runs, "expected": res.expected_runs,
                      "sigma": res.sigma_runs, "z": res.z,
                      "reject_at_5pct": bool(res.reject_at_5pct),
                      "n_ones": res.n_ones, "n_zeros": res.n_zeros}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
