"""Weighted k-means++ seeding and Lloyd iterations (the non-private clusterer)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import WeightedDataset, as_centers, pairwise_sq_dists

__all__ = ["LloydConfig", "kmeanspp_seed", "lloyd", "lloyd_trace"]


@dataclass(frozen=True)
class LloydConfig:
    k: int
    max_iters: int = 10
    relative_tolerance: float = 1e-6
    seeding: str = "kmeanspp"
    initial_centers: np.ndarray | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.relative_tolerance < 0:
            raise ValueError("relative_tolerance must be nonnegative")
        if self.seeding not in ("kmeanspp", "provided"):
            raise ValueError(f"unknown seeding {self.seeding!r}")
        if self.seeding == "provided" and self.initial_centers is None:
            raise ValueError("provided seeding needs initial_centers")


def _weighted_pick(mass: np.ndarray, rng) -> int:
    cdf = np.cumsum(mass)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    # Never land on a zero-mass entry at the right edge.
    idx = min(idx, len(cdf) - 1)
    while mass[idx] <= 0:
        idx -= 1
    return idx


def kmeanspp_seed(data: WeightedDataset, k: int, rng) -> np.ndarray:
    """k centers by weighted D^2 sampling, the first one proportional to weight."""
    w = data.weights
    if len(w) == 0 or not np.any(w > 0):
        raise ValueError("k-means++ needs at least one positive weight")
    pts = data.points
    chosen = [_weighted_pick(w, rng)]
    closest = pairwise_sq_dists(pts, pts[chosen[0]][None, :])[:, 0]
    for _ in range(1, k):
        mass = w * closest
        if not np.any(mass > 0):
            # Fewer distinct support points than k: repeat by weight.
            chosen.append(_weighted_pick(w, rng))
            continue
        nxt = _weighted_pick(mass, rng)
        chosen.append(nxt)
        closest = np.minimum(closest, pairwise_sq_dists(pts, pts[nxt][None, :])[:, 0])
    return pts[chosen].copy()


def _step(pts, w, centers):
    d2 = pairwise_sq_dists(pts, centers)
    labels = np.argmin(d2, axis=1)
    nearest = d2[np.arange(len(pts)), labels]
    cost = float(np.dot(w, nearest))
    new = centers.copy()
    taken = np.zeros(len(pts), dtype=bool)
    for j in range(len(centers)):
        members = labels == j
        mass = float(w[members].sum())
        if mass > 0:
            new[j] = (w[members, None] * pts[members]).sum(axis=0) / mass
            continue
        # Empty cluster: reseed at the farthest positive-weight point not yet used.
        candidates = np.where(taken | (w <= 0), -1.0, nearest)
        far = int(np.argmax(candidates))
        if candidates[far] > 0:
            taken[far] = True
            new[j] = pts[far]
    return new, cost


def lloyd_trace(data: WeightedDataset, config: LloydConfig, rng):
    """Run Lloyd and return (centers, per-iteration costs before each update)."""
    if config.seeding == "provided":
        centers = as_centers(config.initial_centers).copy()
    else:
        centers = kmeanspp_seed(data, config.k, rng)
    pts, w = data.points, data.weights
    costs = []
    for _ in range(config.max_iters):
        new, cost = _step(pts, w, centers)
        costs.append(cost)
        centers = new
        if len(costs) > 1 and costs[-2] - cost <= config.relative_tolerance * costs[-2]:
            break
    return centers, costs


def lloyd(data: WeightedDataset, config: LloydConfig, rng) -> np.ndarray:
    """Weighted Lloyd from k-means++ (or provided) seeds."""
    return lloyd_trace(data, config, rng)[0]
