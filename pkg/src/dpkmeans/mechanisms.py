"""Noise primitives: Laplace, Gaussian, the coverage exponential mechanism, NoisyAVG."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "LaplaceParam",
    "GaussianParam",
    "CoverageDistribution",
    "laplace_sample",
    "gaussian_sample",
    "uniform_in_ball",
    "log_expm1",
    "exp_mechanism_sample",
    "noisy_count",
    "noisy_avg_sigma",
    "noisy_avg",
]


@dataclass(frozen=True)
class LaplaceParam:
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"Laplace scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class GaussianParam:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"Gaussian sigma must be positive, got {self.sigma}")


def laplace_sample(param: LaplaceParam, rng) -> float:
    """Zero-mean Laplace draw with scale b, as the difference of two Exp(b) draws."""
    b = param.scale
    return float(rng.exponential(b) - rng.exponential(b))


def gaussian_sample(param: GaussianParam, rng) -> float:
    return float(rng.normal(0.0, param.sigma))


def uniform_in_ball(dim: int, radius: float, rng, center=None) -> np.ndarray:
    """Uniform point in the closed ball: Gaussian direction, radius ~ R * U^(1/d)."""
    direction = rng.normal(size=dim)
    norm = np.linalg.norm(direction)
    while norm == 0.0:
        direction = rng.normal(size=dim)
        norm = np.linalg.norm(direction)
    point = direction / norm * (radius * rng.random() ** (1.0 / dim))
    if center is not None:
        point = point + np.asarray(center, dtype=float)
    return point


def log_expm1(x):
    """log(exp(x) - 1) for x > 0 without overflow."""
    x = np.asarray(x, dtype=float)
    return x + np.log(-np.expm1(-x))


@dataclass(frozen=True)
class CoverageDistribution:
    """Exponential-mechanism law over a grid where only covered points are listed.

    Grid points absent from ``points`` have cover count zero. Weights are
    ``exp(eps_E * count / 2)`` (utility sensitivity 1). ``total_grid_size`` may
    be astronomically large, so it is also accepted as a log via
    ``log_total_grid_size``.
    """

    points: Sequence
    counts: np.ndarray
    total_grid_size: float | None
    eps_E: float
    log_total_grid_size: float | None = None

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float).reshape(-1)
        object.__setattr__(self, "counts", counts)
        if len(counts) != len(self.points):
            raise ValueError("one cover count per listed grid point")
        if np.any(counts < 1):
            raise ValueError("listed grid points must have cover count >= 1")
        if not self.eps_E > 0:
            raise ValueError("eps_E must be positive")
        if self.log_total_grid_size is None:
            if self.total_grid_size is None or not self.total_grid_size >= 1:
                raise ValueError("grid must be nonempty")
            object.__setattr__(self, "log_total_grid_size", math.log(self.total_grid_size))
        if len(counts) > 0 and math.log(len(counts)) > self.log_total_grid_size + 1e-12:
            raise ValueError("more covered points than the grid holds")

    @property
    def argmax_mode(self) -> bool:
        return math.isinf(self.eps_E)

    @cached_property
    def _log_mass(self) -> tuple[float, float]:
        """(log sum over listed points of e^{a c} - 1, log totalCover)."""
        if len(self.counts) == 0:
            return -math.inf, self.log_total_grid_size
        logw = log_expm1(0.5 * self.eps_E * self.counts)
        top = float(logw.max())
        log_excess = top + math.log(float(np.exp(logw - top).sum()))
        # totalCover = |G| + sum(e^{a c} - 1)
        return log_excess, float(np.logaddexp(self.log_total_grid_size, log_excess))

    @property
    def p_samp(self) -> float:
        """Probability of the covered-point branch, 1 - |G| / totalCover."""
        if self.argmax_mode:
            return 1.0 if len(self.counts) else 0.0
        log_excess, log_total = self._log_mass
        return float(math.exp(log_excess - log_total))

    @property
    def log_p_uniform(self) -> float:
        """log(|G| / totalCover), finite even when p_samp rounds to 1."""
        if self.argmax_mode:
            return -math.inf if len(self.counts) else 0.0
        return self.log_total_grid_size - self._log_mass[1]

    @cached_property
    def _conditional_cdf(self) -> np.ndarray:
        logw = log_expm1(0.5 * self.eps_E * self.counts)
        return np.cumsum(np.exp(logw - logw.max()))

    @cached_property
    def _argmax_indices(self) -> list[int]:
        return np.flatnonzero(self.counts == self.counts.max()).tolist()

    def probability(self, index: int | None) -> float:
        """Exact probability of the listed point at ``index`` (None: any zero-cover point)."""
        _, log_total = self._log_mass
        c = 0.0 if index is None else self.counts[index]
        return float(math.exp(0.5 * self.eps_E * c - log_total))


def exp_mechanism_sample(
    dist: CoverageDistribution,
    uniform_grid_sampler: Callable,
    rng,
):
    """Draw a grid point with probability proportional to exp(eps_E * cover / 2).

    Mixture form: with probability ``p_samp`` pick among covered points with
    weight ``exp(eps_E * cover / 2) - 1``, otherwise uniformly over the whole
    grid. The full grid is never enumerated.

    With ``eps_E = inf`` this is the limiting law: uniform among maximum-cover
    points, or uniform over the grid when nothing is covered.
    """
    if len(dist.counts) == 0:
        return uniform_grid_sampler(rng)
    if dist.argmax_mode:
        ties = dist._argmax_indices
        return dist.points[ties[int(rng.integers(len(ties)))]]
    if rng.random() < dist.p_samp:
        cdf = dist._conditional_cdf
        idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        return dist.points[min(idx, len(cdf) - 1)]
    return uniform_grid_sampler(rng)


def _check_noisy_avg_params(eps: float, delta: float) -> None:
    if not 0 < eps <= 1 / 3:
        raise ValueError(f"NoisyAVG needs eps in (0, 1/3], got {eps}")
    if not 0 < delta < 1:
        raise ValueError(f"NoisyAVG needs delta in (0, 1), got {delta}")


def noisy_count(count: int, eps: float, delta: float, laplace_noise: float) -> float:
    """m_hat = count + noise - (5/eps) ln(2/delta), noise ~ Lap(5/eps)."""
    return count + laplace_noise - (5.0 / eps) * math.log(2.0 / delta)


def noisy_avg_sigma(m_hat: float, diameter: float, eps: float, delta: float) -> float:
    return (5.0 * diameter) / (4.0 * eps * m_hat) * math.sqrt(2.0 * math.log(3.5 / delta))


def noisy_avg(members, diameter: float, eps: float, delta: float, rng, *, dim=None, center=None):
    """Private mean of ``members`` (rows) in a domain of the given diameter.

    A nonpositive noisy count, or an empty member list, yields a uniform point
    in the ball of radius diameter/2 about ``center`` (the origin by default).
    """
    _check_noisy_avg_params(eps, delta)
    members = np.asarray(members, dtype=float)
    if dim is None:
        if members.ndim != 2:
            raise ValueError("members must be a 2-D array, or pass dim")
        dim = members.shape[1]
    members = members.reshape(-1, dim) if members.size else np.empty((0, dim))
    noise = laplace_sample(LaplaceParam(5.0 / eps), rng)
    m_hat = noisy_count(len(members), eps, delta, noise)
    if m_hat <= 0 or len(members) == 0:
        return uniform_in_ball(dim, diameter / 2.0, rng, center=center)
    sigma = noisy_avg_sigma(m_hat, diameter, eps, delta)
    return members.mean(axis=0) + rng.normal(0.0, sigma, size=dim)
