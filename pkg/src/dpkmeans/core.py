"""Datasets, centers, the k-means objective and the shared RNG contract."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dataset",
    "WeightedDataset",
    "DiameterError",
    "make_rng",
    "derive_seed",
    "as_centers",
    "squared_distance",
    "pairwise_sq_dists",
    "assign_clusters",
    "kmeans_cost",
]


class DiameterError(ValueError):
    """A pair of points is farther apart than the declared diameter bound."""

    def __init__(self, i: int, j: int, dist: float, bound: float):
        self.pair = (i, j)
        self.distance = dist
        super().__init__(
            f"points {i} and {j} are {dist:.6g} apart, exceeding diameter bound {bound:.6g}"
        )


def make_rng(seed: int | None) -> np.random.Generator:
    """Seeded stream used everywhere in the library (PCG64)."""
    return np.random.default_rng(seed)


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 64-bit child seed for (seed, *keys), order-free across tasks."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _check_diameter(points: np.ndarray, bound: float, chunk: int = 1024) -> None:
    # Cheap sufficient test first: every point lies within bound/2 of point 0.
    radial = np.sqrt(((points - points[0]) ** 2).sum(axis=1))
    if 2.0 * radial.max() <= bound:
        return
    sq_bound = bound * bound
    norms = (points**2).sum(axis=1)
    for start in range(0, len(points), chunk):
        block = points[start : start + chunk]
        d2 = norms[start : start + chunk, None] + norms[None, :] - 2.0 * block @ points.T
        bad = np.argwhere(d2 > sq_bound * (1 + 1e-9))
        for a, b in bad:
            i, j = start + int(a), int(b)
            exact = float(((points[i] - points[j]) ** 2).sum())
            if exact > sq_bound:
                raise DiameterError(min(i, j), max(i, j), float(np.sqrt(exact)), bound)


@dataclass(frozen=True)
class Dataset:
    """n points in R^d with a declared (and validated) diameter bound."""

    points: np.ndarray
    diameter_bound: float
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("dataset needs n >= 1 points of dimension d >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("dataset coordinates must be finite")
        bound = float(self.diameter_bound)
        if not (bound > 0 and np.isfinite(bound)):
            raise ValueError("diameter_bound must be a positive finite number")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "diameter_bound", bound)
        if self.validate:
            _check_diameter(pts, bound)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class WeightedDataset:
    """Points with nonnegative real weights (the noisy proxy dataset)."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.array(self.weights, dtype=float, copy=True).reshape(-1)
        if pts.ndim != 2 or len(w) != len(pts):
            raise ValueError("points and weights must have matching lengths")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(w))):
            raise ValueError("points and weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def unweighted(cls, points) -> "WeightedDataset":
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.ones(len(pts)))

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return len(self.points)


def _points_and_weights(data) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(data, WeightedDataset):
        return data.points, data.weights
    if isinstance(data, Dataset):
        return data.points, None
    pts = np.asarray(data, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts, None


def as_centers(centers) -> np.ndarray:
    """Validate a center set: k >= 1 finite vectors, returned as a (k, d) array."""
    c = np.asarray(centers, dtype=float)
    if c.ndim == 1:
        c = c[None, :]
    if c.ndim != 2 or c.shape[0] == 0:
        raise ValueError("center set must be nonempty")
    if not np.all(np.isfinite(c)):
        raise ValueError("centers must be finite")
    return c


def squared_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    diff = p - q
    return float(np.dot(diff, diff))


def pairwise_sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """(n, k) matrix of squared distances, computed by explicit differences."""
    if points.shape[1] != centers.shape[1]:
        raise ValueError(
            f"dimension mismatch: points have d={points.shape[1]}, centers d={centers.shape[1]}"
        )
    out = np.empty((points.shape[0], centers.shape[0]))
    for j, c in enumerate(centers):
        diff = points - c
        out[:, j] = np.einsum("ij,ij->i", diff, diff)
    return out


def assign_clusters(data, centers) -> np.ndarray:
    """Index of the nearest center per point; ties go to the lowest index."""
    pts, _ = _points_and_weights(data)
    c = as_centers(centers)
    # argmin returns the first minimum, which is the lowest-index tie-break.
    return np.argmin(pairwise_sq_dists(pts, c), axis=1)


def kmeans_cost(data, centers) -> float:
    """Sum over points of weight times squared distance to the nearest center."""
    pts, w = _points_and_weights(data)
    c = as_centers(centers)
    nearest = pairwise_sq_dists(pts, c).min(axis=1)
    if w is None:
        return float(nearest.sum())
    return float(np.dot(w, nearest))
