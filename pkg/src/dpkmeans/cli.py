"""Command line: cluster a CSV, generate fixtures, run the benchmark, inspect budgets.

Data goes to stdout (or --out); messages and errors go to stderr. Exit status
is 0 on success, 1 on a runtime error and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

import numpy as np

from .datasets import gen_hard_instance, gen_synthetic, ingest_csv
from .experiment import ExperimentSpec, run_experiment
from .pipeline import PipelineConfig, accountant, run, split_budget


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _parse_center(text):
    if text is None:
        return None
    return tuple(float(x) for x in text.split(","))


def _parse_ks(text: str) -> tuple:
    ks = tuple(int(x) for x in text.split(",") if x.strip())
    if not ks:
        raise ValueError("--k needs at least one value")
    return ks


def _write_points(points: np.ndarray, out) -> None:
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(points):
            w.writerow([repr(float(x)) for x in row])
    finally:
        if out:
            fh.close()


def _privacy_args(p: argparse.ArgumentParser, rounds_default: int) -> None:
    p.add_argument("--eps", type=float, default=1.0, help="total privacy budget epsilon")
    p.add_argument("--delta", type=float, default=None, help="total delta (default n^-1.5)")
    p.add_argument("--eps-approx", type=float, default=0.5, help="approximation constant in (0, 0.5]")
    p.add_argument("--dprime", type=int, default=None, help="projection dimension (default ceil(log2(n)/2))")
    p.add_argument("--kprime", type=int, default=None, help="draws per grid level (default ceil(k/eps-approx))")
    p.add_argument("--dp-lloyd-rounds", type=int, default=rounds_default)
    p.add_argument("--clamp", action="store_true", help="hold eps_G at 1/3 and reassign the excess")
    p.add_argument("--center", default=None, help="public domain center, comma separated (default origin)")
    p.add_argument("--max-proposals", type=int, default=500_000, help="rejection sampler budget per draw")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpkmeans", description="Differentially private k-means on grids.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="privately cluster a CSV file, print centers")
    p.add_argument("--input", required=True)
    p.add_argument("--diameter", type=float, required=True, help="declared diameter bound of the domain")
    p.add_argument("--skip-header", action="store_true")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", default=None, help="centers CSV (default stdout)")
    _privacy_args(p, rounds_default=0)

    p = sub.add_parser("gen-synth", help="Gaussian mixture fixture as CSV")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--d", type=int, default=20)
    p.add_argument("--components", type=int, default=16)
    p.add_argument("--spread", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("gen-hard", help="coded hard instance (optimal cost 0) as CSV")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--multiplicity", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("experiment", help="private vs Lloyd vs random centers over k and seeds")
    p.add_argument("--source", choices=("synthetic", "file", "hard"), default="synthetic")
    p.add_argument("--input", default=None)
    p.add_argument("--diameter", type=float, default=None)
    p.add_argument("--skip-header", action="store_true")
    p.add_argument("--k", default="2,6,10", help="comma separated k values")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--d", type=int, default=20)
    p.add_argument("--components", type=int, default=16)
    p.add_argument("--spread", type=float, default=0.1)
    p.add_argument("--multiplicity", type=int, default=5)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    _privacy_args(p, rounds_default=1)

    p = sub.add_parser("budget", help="split a total budget and check it against the accountant")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--rounds", "--dp-lloyd-rounds", dest="rounds", type=int, default=0)
    p.add_argument("--clamp", action="store_true")
    return parser


def _cmd_cluster(args) -> int:
    data = ingest_csv(args.input, args.diameter, skip_header=args.skip_header)
    delta = args.delta if args.delta is not None else data.n ** -1.5
    params = split_budget(args.eps, delta, rounds=args.dp_lloyd_rounds, clamp=args.clamp)
    cfg = PipelineConfig(
        k=args.k, privacy=params, eps=args.eps_approx, dprime=args.dprime, kprime=args.kprime,
        final_dp_lloyd_rounds=args.dp_lloyd_rounds, seed=args.seed, center=_parse_center(args.center),
        max_proposals=args.max_proposals,
    )
    res = run(data, cfg)
    _write_points(res.centers, args.out)
    _err(f"cost={res.cost:.6g} eps_total={res.privacy.eps_total:.6g} delta_total={res.privacy.delta_total:.3g}")
    return 0


def _cmd_gen_synth(args) -> int:
    data = gen_synthetic(args.n, args.d, args.components, args.spread, seed=args.seed)
    _write_points(data.points, args.out)
    _err(f"n={data.n} d={data.d} diameter={data.diameter_bound!r}")
    return 0


def _cmd_gen_hard(args) -> int:
    data = gen_hard_instance(args.k, args.d, args.multiplicity, seed=args.seed)
    _write_points(data.points, args.out)
    _err(f"n={data.n} d={data.d} diameter={data.diameter_bound!r}")
    return 0


def _load_experiment_data(args):
    if args.source == "file":
        if args.input is None or args.diameter is None:
            raise ValueError("--source file needs --input and --diameter")
        return ingest_csv(args.input, args.diameter, skip_header=args.skip_header)
    if args.source == "hard":
        return gen_hard_instance(max(_parse_ks(args.k)), args.d, args.multiplicity, seed=args.data_seed)
    return gen_synthetic(args.n, args.d, args.components, args.spread, seed=args.data_seed)


def _cmd_experiment(args) -> int:
    data = _load_experiment_data(args)
    spec = ExperimentSpec(
        ks=_parse_ks(args.k), eps_total=args.eps, delta_total=args.delta, reps=args.reps, seed=args.seed,
        eps_approx=args.eps_approx, dprime=args.dprime, kprime=args.kprime,
        dp_lloyd_rounds=args.dp_lloyd_rounds, clamp=args.clamp, center=_parse_center(args.center),
        max_proposals=args.max_proposals, source=args.source,
    )
    result = run_experiment(data, spec, args.out, log=_err)
    with open(result["summary_csv"]) as fh:
        sys.stdout.write(fh.read())
    return 0


def _cmd_budget(args) -> int:
    params = split_budget(args.eps, args.delta, rounds=args.rounds, clamp=args.clamp)
    report = accountant(params, args.rounds)
    print(f"eps_E={params.eps_E!r} delta_E={params.delta_E!r}")
    print(f"eps_L={params.eps_L!r}")
    print(f"eps_G={params.eps_G!r} delta_G={params.delta_G!r}")
    for name, (e, d) in report.stages.items():
        print(f"stage {name}: eps={e!r} delta={d!r}")
    if "dp_lloyd" in report.stages:
        e, d = report.stages["dp_lloyd"]
        print(f"surcharge for {args.rounds} DP-Lloyd round(s): eps={e!r} delta={d!r}")
    ok = math.isclose(report.eps_total, args.eps, rel_tol=1e-12) and math.isclose(
        report.delta_total, args.delta, rel_tol=1e-12
    )
    print(f"total: eps={report.eps_total!r} delta={report.delta_total!r}")
    print("round-trip: " + ("OK" if ok else "MISMATCH"))
    return 0 if ok else 1


_COMMANDS = {
    "cluster": _cmd_cluster,
    "gen-synth": _cmd_gen_synth,
    "gen-hard": _cmd_gen_hard,
    "experiment": _cmd_experiment,
    "budget": _cmd_budget,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        _err(f"dpkmeans {args.command}: error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
