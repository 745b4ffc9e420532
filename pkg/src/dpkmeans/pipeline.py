"""End-to-end private k-means and its privacy accountant."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clustering import LloydConfig, lloyd
from .core import Dataset, WeightedDataset, assign_clusters, kmeans_cost, make_rng
from .gridcover import build_offsets, grid_levels, private_grid_set_cover
from .mechanisms import LaplaceParam, laplace_sample, noisy_avg
from .preprocess import lift_assignment, make_jl, reduce_and_normalize

__all__ = [
    "InfeasibleBudget",
    "PrivacyParams",
    "PrivacyReport",
    "PipelineConfig",
    "ClusteringResult",
    "accountant",
    "split_budget",
    "build_proxy",
    "dp_lloyd_round",
    "run",
]

NOISY_AVG_MAX_EPS = 1.0 / 3.0


class InfeasibleBudget(ValueError):
    """The requested total cannot be split without exceeding the NoisyAVG limit."""


@dataclass(frozen=True)
class PrivacyParams:
    eps_E: float
    delta_E: float
    eps_L: float
    eps_G: float
    delta_G: float

    def __post_init__(self):
        for name in ("eps_E", "eps_L", "eps_G"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a positive finite number, got {value}")
        for name in ("delta_E", "delta_G"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
        if self.eps_G > NOISY_AVG_MAX_EPS * (1 + 1e-12):
            raise ValueError(f"eps_G must be <= 1/3, got {self.eps_G}")


@dataclass(frozen=True)
class PrivacyReport:
    eps_total: float
    delta_total: float
    stages: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"eps_total": self.eps_total, "delta_total": self.delta_total, "stages": self.stages}


def accountant(params: PrivacyParams, dp_lloyd_rounds: int = 0) -> PrivacyReport:
    """Compose the stages: cover rounds, proxy counts, NoisyAVG, optional DP-Lloyd rounds.

    All k' * m exponential-mechanism draws together cost
    (e * eps_E * ln(1/delta_E) / 2, delta_E). NoisyAVG over disjoint clusters
    composes in parallel. Each DP-Lloyd round adds one Laplace count release
    and one parallel NoisyAVG pass.
    """
    if dp_lloyd_rounds < 0:
        raise ValueError("dp_lloyd_rounds must be >= 0")
    cover_eps = math.e * params.eps_E * math.log(1.0 / params.delta_E) / 2.0
    stages = {
        "grid_cover": (cover_eps, params.delta_E),
        "proxy_counts": (params.eps_L, 0.0),
        "noisy_avg": (params.eps_G, params.delta_G),
    }
    if dp_lloyd_rounds:
        stages["dp_lloyd"] = (
            dp_lloyd_rounds * (params.eps_L + params.eps_G),
            dp_lloyd_rounds * params.delta_G,
        )
    eps_total = sum(e for e, _ in stages.values())
    delta_total = sum(d for _, d in stages.values())
    return PrivacyReport(eps_total, delta_total, stages)


def split_budget(eps_total: float, delta_total: float, rounds: int = 0, *, clamp: bool = False) -> PrivacyParams:
    """Invert the accountant with an even split.

    The cover rounds, the Laplace releases and the NoisyAVG releases each get
    a third of ``eps_total``; delta is halved between the cover rounds and the
    NoisyAVG calls. The Laplace and NoisyAVG thirds are shared across the
    ``1 + rounds`` passes. If the NoisyAVG share would exceed 1/3 this raises
    ``InfeasibleBudget``, unless ``clamp`` is set, in which case eps_G is held
    at 1/3 and the excess goes half to the cover rounds, half to the counts.
    """
    if not (eps_total > 0 and math.isfinite(eps_total)):
        raise ValueError("eps_total must be positive and finite")
    if not 0 < delta_total < 1:
        raise ValueError("delta_total must lie in (0, 1)")
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    passes = 1 + rounds
    third = eps_total / 3.0
    cover_share, count_share, avg_share = third, third, third
    if avg_share / passes > NOISY_AVG_MAX_EPS:
        if not clamp:
            raise InfeasibleBudget(
                f"eps_G would be {avg_share / passes:.6g} > 1/3; lower eps_total or allow clamping"
            )
        avg_share = passes * NOISY_AVG_MAX_EPS
        excess = third - avg_share
        cover_share += excess / 2.0
        count_share += excess / 2.0
    delta_E = delta_total / 2.0
    eps_E = 2.0 * cover_share / (math.e * math.log(1.0 / delta_E))
    eps_G = min(avg_share / passes, NOISY_AVG_MAX_EPS)
    return PrivacyParams(eps_E, delta_E, count_share / passes, eps_G, delta_total / (2.0 * passes))


def build_proxy(reduced: Dataset, C, eps_L: float, rng) -> WeightedDataset:
    """Candidate centers weighted by clamped Laplace-noised nearest-candidate counts."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or len(C) == 0:
        raise ValueError("candidate set must be nonempty")
    counts = np.bincount(assign_clusters(reduced, C), minlength=len(C))
    noise = LaplaceParam(1.0 / eps_L)
    weights = np.array([max(0.0, c + laplace_sample(noise, rng)) for c in counts])
    return WeightedDataset(C, weights)


@dataclass(frozen=True)
class PipelineConfig:
    k: int
    privacy: PrivacyParams
    eps: float = 0.5
    dprime: int | None = None
    kprime: int | None = None
    final_dp_lloyd_rounds: int = 0
    seed: int = 0
    center: tuple | None = None
    lloyd_iters: int = 10
    max_pairs: int = 4_000_000
    max_proposals: int = 500_000
    clip_to_domain: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 < self.eps <= 0.5:
            raise ValueError(f"eps must lie in (0, 0.5], got {self.eps}")
        if self.kprime is not None and self.kprime < 1:
            raise ValueError("kprime must be >= 1")
        if self.final_dp_lloyd_rounds < 0:
            raise ValueError("final_dp_lloyd_rounds must be >= 0")

    @property
    def kprime_value(self) -> int:
        return self.kprime if self.kprime is not None else math.ceil(self.k / self.eps)


@dataclass
class ClusteringResult:
    centers: np.ndarray
    assignment: np.ndarray
    cost: float
    privacy: PrivacyReport
    diagnostics: dict = field(default_factory=dict)


def _clip_to_ball(point: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    offset = point - center
    norm = float(np.linalg.norm(offset))
    if norm <= radius:
        return point
    return center + offset * (radius / norm)


def dp_lloyd_round(data: Dataset, centers: np.ndarray, params: PrivacyParams, rng, *, center=None, clip=True):
    """One private Lloyd step in the original space.

    Cluster sizes are released with Lap(1/eps_L); a cluster is re-estimated with
    NoisyAVG only when its released size exceeds the NoisyAVG count offset
    (5/eps_G) ln(2/delta_G), otherwise its previous center is kept.
    """
    origin = np.zeros(data.d) if center is None else np.asarray(center, dtype=float)
    labels = assign_clusters(data, centers)
    counts = np.bincount(labels, minlength=len(centers))
    noise = LaplaceParam(1.0 / params.eps_L)
    released = [c + laplace_sample(noise, rng) for c in counts]
    offset = (5.0 / params.eps_G) * math.log(2.0 / params.delta_G)
    out = np.array(centers, dtype=float, copy=True)
    for j, size in enumerate(released):
        if size <= offset:
            continue
        mu = noisy_avg(data.points[labels == j], data.diameter_bound, params.eps_G, params.delta_G, rng,
                       dim=data.d, center=origin)
        out[j] = _clip_to_ball(mu, origin, data.diameter_bound / 2.0) if clip else mu
    return out, released


def run(data: Dataset, config: PipelineConfig) -> ClusteringResult:
    """Private k-means: reduce, cover, build the noisy proxy, cluster it, average privately."""
    if data.n < 2:
        raise ValueError("private k-means needs n >= 2")
    params = config.privacy
    rng = make_rng(config.seed)
    origin = np.zeros(data.d) if config.center is None else np.asarray(config.center, dtype=float)
    if origin.shape != (data.d,):
        raise ValueError("center must have the data dimension")

    transform = make_jl(data.n, data.d, config.eps, rng, target_dim=config.dprime)
    reduced, record = reduce_and_normalize(data, transform, center=origin)

    levels = grid_levels(data.n, transform.target_dim, config.eps)
    kprime = config.kprime_value
    pool = np.ones(data.n, dtype=bool)
    candidates, level_cover, modes = [], [], []
    for level in levels:
        res = private_grid_set_cover(
            reduced.points, pool, level, kprime, params.eps_E, rng,
            offsets=build_offsets(level, slack=1e-9), max_pairs=config.max_pairs,
            max_proposals=config.max_proposals,
        )
        candidates.append(res.centers)
        level_cover.append(res.round_cover)
        modes.append(res.mode)
    # The proxy is built from every reduced point, whatever the cover rounds removed.
    C = np.vstack(candidates)

    proxy = build_proxy(reduced, C, params.eps_L, rng)
    if proxy.total_weight == 0:
        # Only public quantities are involved here.
        proxy = WeightedDataset(proxy.points, np.ones(len(proxy)))
    proxy_centers = lloyd(proxy, LloydConfig(config.k, max_iters=config.lloyd_iters), rng)

    reduced_assignment = assign_clusters(reduced, proxy_centers)
    clusters = lift_assignment(data, record, reduced_assignment, config.k)
    radius = data.diameter_bound / 2.0
    centers = []
    for members in clusters:
        mu = noisy_avg(members, data.diameter_bound, params.eps_G, params.delta_G, rng,
                       dim=data.d, center=origin)
        centers.append(_clip_to_ball(mu, origin, radius) if config.clip_to_domain else mu)
    centers = np.array(centers)

    released_sizes = []
    for _ in range(config.final_dp_lloyd_rounds):
        centers, released = dp_lloyd_round(data, centers, params, rng, center=origin, clip=config.clip_to_domain)
        released_sizes.append(released)

    diagnostics = {
        "target_dim": transform.target_dim,
        "levels": len(levels),
        "kprime": kprime,
        "candidates": len(C),
        "projected_points": len(record.projected_indices),
        "level_cover": level_cover,
        "cover_modes": modes,
        "proxy_weight": proxy.total_weight,
        "dp_lloyd_released_sizes": released_sizes,
    }
    return ClusteringResult(
        centers=centers,
        assignment=assign_clusters(data, centers),
        cost=kmeans_cost(data, centers),
        privacy=accountant(params, config.final_dp_lloyd_rounds),
        diagnostics=diagnostics,
    )
