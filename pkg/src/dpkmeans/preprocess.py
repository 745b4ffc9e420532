"""Random projection, scaling into the unit ball, and lifting clusters back."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset

__all__ = [
    "JlTransform",
    "PreprocessRecord",
    "default_target_dim",
    "make_jl",
    "reduce_and_normalize",
    "lift_assignment",
]


def default_target_dim(n: int, log_base: float = 2.0) -> int:
    """max(1, ceil(log_base(n) / 2))."""
    return max(1, math.ceil(math.log(n, log_base) / 2.0))


@dataclass(frozen=True)
class JlTransform:
    matrix: np.ndarray
    eps: float

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] < 1 or not np.all(np.isfinite(m)):
            raise ValueError("JL matrix must be a finite 2-D array with d' >= 1 rows")
        if not 0 <= self.eps <= 0.5:
            raise ValueError(f"distortion eps must lie in [0, 0.5], got {self.eps}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def source_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def target_dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, d: int, eps: float = 0.0) -> "JlTransform":
        return cls(np.eye(d), eps)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.matrix.T


def make_jl(n: int, d: int, eps: float, rng, target_dim: int | None = None) -> JlTransform:
    """Dense Gaussian projection with i.i.d. N(0, 1/d') entries."""
    if not 0 < eps <= 0.5:
        raise ValueError(f"eps must lie in (0, 0.5], got {eps}")
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    dp = default_target_dim(n) if target_dim is None else int(target_dim)
    if dp < 1:
        raise ValueError("target dimension must be >= 1")
    return JlTransform(rng.normal(0.0, 1.0 / math.sqrt(dp), size=(dp, d)), eps)


@dataclass(frozen=True)
class PreprocessRecord:
    transform: JlTransform
    scale_factor: float
    projected_indices: list = field(default_factory=list)
    center: np.ndarray | None = None

    def __call__(self, points) -> np.ndarray:
        """Apply T' (translate, project, scale, clip to the unit ball)."""
        pts = np.asarray(points, dtype=float)
        if self.center is not None:
            pts = pts - self.center
        out = self.transform.apply(pts) / self.scale_factor
        norms = np.linalg.norm(out, axis=1)
        far = norms > 1.0
        out[far] /= norms[far, None]
        return out


def reduce_and_normalize(data: Dataset, t: JlTransform, center=None) -> tuple[Dataset, PreprocessRecord]:
    """Map points by T, divide by diameter*(1+eps)/2, then clip into B_1(0).

    ``center`` is the public center of the data domain; points are translated
    by it first so that the domain ball sits at the origin.
    """
    if data.d != t.source_dim:
        raise ValueError(f"transform expects d={t.source_dim}, data has d={data.d}")
    scale = data.diameter_bound * (1.0 + t.eps) / 2.0
    c = None if center is None else np.asarray(center, dtype=float)
    pts = data.points if c is None else data.points - c
    reduced = t.apply(pts) / scale
    norms = np.linalg.norm(reduced, axis=1)
    far = np.flatnonzero(norms > 1.0)
    reduced[far] /= norms[far, None]
    record = PreprocessRecord(t, scale, far.tolist(), c)
    return Dataset(reduced, 2.0, validate=False), record


def lift_assignment(original: Dataset, t_prime: PreprocessRecord, assignment, k: int | None = None) -> list:
    """Per-cluster arrays of original-space points, following the reduced assignment."""
    assignment = np.asarray(assignment, dtype=int)
    if len(assignment) != original.n:
        raise ValueError(f"assignment has {len(assignment)} entries for {original.n} points")
    if k is None:
        k = int(assignment.max()) + 1 if len(assignment) else 0
    return [original.points[assignment == i] for i in range(k)]
