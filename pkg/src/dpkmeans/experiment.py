"""Seeded benchmark harness: private pipeline against Lloyd and random centers.

Every run becomes one JSON line (append-safe) and one row of ``runs.csv``.
``summary.csv`` holds per-(algorithm, k) means and sample standard deviations
and leaves out wall time, so identical specs give byte-identical summaries.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clustering import LloydConfig, lloyd
from .core import Dataset, WeightedDataset, derive_seed, kmeans_cost, make_rng
from .mechanisms import uniform_in_ball
from .pipeline import PipelineConfig, run, split_budget

__all__ = ["ExperimentSpec", "run_experiment", "summarize", "RUN_COLUMNS", "SUMMARY_COLUMNS", "ALGORITHMS", "mean_cost"]

RUN_COLUMNS = ["algorithm", "k", "seed", "cost", "eps_total", "delta_total", "wall_ms"]
SUMMARY_COLUMNS = ["algorithm", "k", "n_runs", "cost_mean", "cost_std", "eps_total", "delta_total"]
ALGORITHMS = ("private", "lloyd", "random")


@dataclass(frozen=True)
class ExperimentSpec:
    ks: tuple
    eps_total: float = 1.0
    delta_total: float | None = None  # n ** -1.5 when unset
    reps: int = 5
    seed: int = 0
    eps_approx: float = 0.5
    dprime: int | None = None
    kprime: int | None = None
    dp_lloyd_rounds: int = 1
    clamp: bool = False
    center: tuple | None = None
    lloyd_iters: int = 10
    max_proposals: int = 500_000
    source: str = "synthetic"

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.ks:
            raise ValueError("need at least one k")
        if any(int(k) < 1 for k in self.ks):
            raise ValueError("every k must be >= 1")


def _random_centers(data: Dataset, k: int, rng, center) -> np.ndarray:
    return np.array([uniform_in_ball(data.d, data.diameter_bound / 2.0, rng, center=center) for _ in range(k)])


def _one(algorithm: str, data: Dataset, k: int, seed: int, spec: ExperimentSpec, params, origin):
    if algorithm == "private":
        cfg = PipelineConfig(
            k=k, privacy=params, eps=spec.eps_approx, dprime=spec.dprime, kprime=spec.kprime,
            final_dp_lloyd_rounds=spec.dp_lloyd_rounds, seed=seed, center=tuple(origin),
            lloyd_iters=spec.lloyd_iters, max_proposals=spec.max_proposals,
        )
        res = run(data, cfg)
        return res.cost, res.privacy.eps_total, res.privacy.delta_total
    rng = make_rng(seed)
    if algorithm == "lloyd":
        centers = lloyd(WeightedDataset.unweighted(data.points), LloydConfig(k, max_iters=spec.lloyd_iters), rng)
    else:
        centers = _random_centers(data, k, rng, origin)
    return kmeans_cost(data, centers), 0.0, 0.0


def summarize(records: list[dict]) -> list[dict]:
    """Mean and sample standard deviation of cost per (algorithm, k), in first-seen order."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r["algorithm"], r["k"]), []).append(r)
    rows = []
    for (algorithm, k), rs in groups.items():
        costs = np.array([r["cost"] for r in rs], dtype=float)
        rows.append({
            "algorithm": algorithm,
            "k": k,
            "n_runs": len(rs),
            "cost_mean": float(costs.mean()),
            "cost_std": float(costs.std(ddof=1)) if len(costs) > 1 else 0.0,
            "eps_total": rs[0]["eps_total"],
            "delta_total": rs[0]["delta_total"],
        })
    return rows


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({c: repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns})


def run_experiment(data: Dataset, spec: ExperimentSpec, out_dir, log=None) -> dict:
    """Run every (k, rep, algorithm) cell and write runs.jsonl, runs.csv and summary.csv.

    Seeds come from ``derive_seed(spec.seed, rep)``, so a cell's result does
    not depend on which other cells ran. Returns the paths and summary rows.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    delta = spec.delta_total if spec.delta_total is not None else data.n ** -1.5
    params = split_budget(spec.eps_total, delta, rounds=spec.dp_lloyd_rounds, clamp=spec.clamp)
    origin = np.zeros(data.d) if spec.center is None else np.asarray(spec.center, dtype=float)

    jsonl = out / "runs.jsonl"
    records = []
    with open(jsonl, "w") as fh:
        for k in spec.ks:
            for rep in range(spec.reps):
                seed = derive_seed(spec.seed, rep)
                for j, algorithm in enumerate(ALGORITHMS):
                    t0 = time.perf_counter()
                    cost, eps_used, delta_used = _one(algorithm, data, int(k), derive_seed(seed, j), spec, params, origin)
                    wall_ms = (time.perf_counter() - t0) * 1000.0
                    rec = {
                        "algorithm": algorithm,
                        "k": int(k),
                        "rep": rep,
                        "seed": seed,
                        "cost": float(cost),
                        "eps_total": float(eps_used),
                        "delta_total": float(delta_used),
                        "wall_ms": round(wall_ms, 3),
                        "source": spec.source,
                        "n": data.n,
                        "d": data.d,
                    }
                    if algorithm == "private":
                        rec["privacy"] = {
                            "eps_E": params.eps_E, "delta_E": params.delta_E, "eps_L": params.eps_L,
                            "eps_G": params.eps_G, "delta_G": params.delta_G,
                        }
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
                    fh.flush()
                    records.append(rec)
                    if log is not None:
                        log(f"{algorithm} k={k} rep={rep} cost={cost:.6g} ({wall_ms:.0f} ms)")

    summary = summarize(records)
    runs_csv, summary_csv = out / "runs.csv", out / "summary.csv"
    _write_csv(runs_csv, RUN_COLUMNS, records)
    _write_csv(summary_csv, SUMMARY_COLUMNS, summary)
    return {"jsonl": jsonl, "runs_csv": runs_csv, "summary_csv": summary_csv, "summary": summary, "records": records}


def mean_cost(summary: list[dict], algorithm: str, k: int) -> float:
    for row in summary:
        if row["algorithm"] == algorithm and row["k"] == k:
            return row["cost_mean"]
    return math.nan
