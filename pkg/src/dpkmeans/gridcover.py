"""Private max-coverage over geometrically refined grids.

Each level i fixes a grid of unit t_i inside [-1, 1]^d' and a covering radius
``r_i + t_i sqrt(d')``. A round scores every grid point by how many still
uncovered points lie strictly inside that radius, draws one grid point with
the exponential mechanism, and removes what it covers.

Two exact samplers share the same law. When ``pool size * |offsets|`` is
small the cover counts are materialized (``CoverageDistribution``); otherwise
a rejection sampler draws point/offset pairs and scores only the proposals,
which keeps the work independent of the number of covered grid points.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .mechanisms import CoverageDistribution, exp_mechanism_sample, log_expm1

__all__ = [
    "GridLevel",
    "OffsetSet",
    "GridCoverResult",
    "grid_levels",
    "floor_to_grid",
    "build_offsets",
    "signed_offsets",
    "candidate_grid_points",
    "cover_counts",
    "private_grid_set_cover",
    "max_cover_bound",
    "SamplerBudgetExceeded",
]


@dataclass(frozen=True)
class GridLevel:
    index: int
    t: float
    r: float
    dim: int

    def __post_init__(self):
        if not (self.t > 0 and self.r >= 0 and self.dim >= 1):
            raise ValueError(f"invalid grid level {self}")

    @property
    def threshold(self) -> float:
        """Covering radius r + t sqrt(d')."""
        return self.r + self.t * math.sqrt(self.dim)

    @property
    def sq_threshold(self) -> float:
        return self.threshold**2

    @property
    def half_extent(self) -> int:
        """Largest |b_j| with t * b_j inside [-1, 1]."""
        return int(math.floor(1.0 / self.t + 1e-9))

    @property
    def log_grid_size(self) -> float:
        return self.dim * math.log(2 * self.half_extent + 1)

    def grid_point(self, b) -> np.ndarray:
        return self.t * np.asarray(b, dtype=float)


def grid_levels(n: int, dprime: int, eps: float) -> list[GridLevel]:
    """m = ceil(log_{1+eps}(2n)) levels; level 1 has r = 1/n, t = eps/(n sqrt(d'))."""
    if n < 2:
        raise ValueError("need n >= 2")
    if not 0 < eps <= 0.5:
        raise ValueError(f"eps must lie in (0, 0.5], got {eps}")
    m = math.ceil(math.log(2 * n) / math.log1p(eps))
    levels = []
    for i in range(1, m + 1):
        growth = (1.0 + eps) ** (i - 1)
        levels.append(GridLevel(i, eps / (n * math.sqrt(dprime)) * growth, growth / n, dprime))
    return levels


def floor_to_grid(p, t: float) -> np.ndarray:
    return np.floor(np.asarray(p, dtype=float) / t).astype(np.int64)


@dataclass(frozen=True)
class OffsetSet:
    """Nonnegative integer vectors v with sum_j (t v_j)^2 < threshold^2."""

    offsets: np.ndarray

    def __len__(self) -> int:
        return len(self.offsets)


def build_offsets(level: GridLevel, slack: float = 0.0) -> OffsetSet:
    """Coordinate-by-coordinate enumeration, pruning prefixes by the residual budget.

    ``slack`` inflates the squared budget by a relative amount; candidate
    enumeration uses a tiny slack so rounding can never drop a boundary point.
    """
    t = level.t
    budget = level.sq_threshold * (1.0 + slack)
    vmax = int(math.floor(level.threshold / t)) + 1
    vals = np.arange(vmax + 1, dtype=np.int64)
    steps = (t * vals) ** 2
    prefix = np.zeros((1, 0), dtype=np.int64)
    sums = np.zeros(1)
    for _ in range(level.dim):
        extended = sums[:, None] + steps[None, :]
        rows, cols = np.nonzero(extended < budget)
        prefix = np.hstack([prefix[rows], vals[cols][:, None]])
        sums = extended[rows, cols]
    return OffsetSet(prefix)


def signed_offsets(offsets: OffsetSet) -> np.ndarray:
    """All displacements s + (2s - 1) v from the floor cell, s in {0, 1}^d'."""
    v = offsets.offsets
    dim = v.shape[1]
    blocks = []
    for mask in range(2**dim):
        s = np.array([(mask >> j) & 1 for j in range(dim)], dtype=bool)
        blocks.append(np.where(s, 1 + v, -v))
    return np.concatenate(blocks)


def _grid_sq_dist(b: np.ndarray, p: np.ndarray, t: float) -> np.ndarray:
    # Accumulated coordinate by coordinate so every caller rounds identically.
    total = (t * b[..., 0] - p[..., 0]) ** 2
    for j in range(1, b.shape[-1]):
        total = total + (t * b[..., j] - p[..., j]) ** 2
    return total


def candidate_grid_points(p, level: GridLevel, offsets: OffsetSet) -> set[tuple]:
    """Grid points t*b inside [-1, 1]^d' strictly within the covering radius of p."""
    p = np.asarray(p, dtype=float)
    b = floor_to_grid(p, level.t) + signed_offsets(offsets)
    keep = np.all(np.abs(b) <= level.half_extent, axis=1)
    b = b[keep]
    keep = _grid_sq_dist(b, p, level.t) < level.sq_threshold
    return {tuple(int(x) for x in row) for row in b[keep]}


def _candidate_pairs(points: np.ndarray, level: GridLevel, deltas: np.ndarray, chunk_rows: int = 1 << 21):
    """(point index, grid key) for every point/grid-point pair within the radius."""
    t, bound, r2 = level.t, level.half_extent, level.sq_threshold
    floors = floor_to_grid(points, t)
    per = max(1, chunk_rows // max(1, len(deltas)))
    idx_parts, key_parts = [], []
    for start in range(0, len(points), per):
        f = floors[start : start + per]
        b = f[:, None, :] + deltas[None, :, :]
        p = np.broadcast_to(points[start : start + per, None, :], b.shape)
        ok = np.all(np.abs(b) <= bound, axis=2) & (_grid_sq_dist(b, p, t) < r2)
        rows, cols = np.nonzero(ok)
        idx_parts.append(rows + start)
        key_parts.append(b[rows, cols])
    if not idx_parts:
        return np.empty(0, dtype=np.int64), np.empty((0, level.dim), dtype=np.int64)
    return np.concatenate(idx_parts), np.concatenate(key_parts)


def cover_counts(points, level: GridLevel, offsets: OffsetSet | None = None):
    """Unique covered grid keys and their cover counts over all given points."""
    points = np.asarray(points, dtype=float)
    offsets = offsets or build_offsets(level, slack=1e-9)
    _, keys = _candidate_pairs(points, level, signed_offsets(offsets))
    uniq, counts = np.unique(keys, axis=0, return_counts=True)
    return uniq, counts


@dataclass
class GridCoverResult:
    centers: np.ndarray
    grid_keys: np.ndarray
    covered: dict = field(default_factory=dict)
    round_cover: list = field(default_factory=list)
    mode: str = "enumerate"


class _Enumerated:
    """Materialized cover lists for one level, filtered against the live pool per round."""

    def __init__(self, points, live, level, deltas):
        local, keys = _candidate_pairs(points[live], level, deltas)
        self.pair_point = live[local]
        self.level = level
        self.radix = 2 * level.half_extent + 1
        self.encodable = level.dim * math.log2(self.radix) < 62
        if self.encodable:
            codes = self._encode(keys)
            self.codes, first, inverse = np.unique(codes, return_index=True, return_inverse=True)
            self.keys = keys[first]
        else:
            self.codes = None
            self.keys, inverse = np.unique(keys, axis=0, return_inverse=True)
        self.inverse = inverse.reshape(-1)

    def _encode(self, b: np.ndarray) -> np.ndarray:
        shifted = b + self.level.half_extent
        code = np.zeros(shifted.shape[:-1], dtype=np.int64)
        for j in range(self.level.dim):
            code = code * self.radix + shifted[..., j]
        return code

    def distribution(self, pool: np.ndarray, eps_E: float):
        alive = pool[self.pair_point]
        counts = np.bincount(self.inverse[alive], minlength=len(self.keys))
        nz = np.flatnonzero(counts)
        return CoverageDistribution(
            self.keys[nz], counts[nz], None, eps_E, log_total_grid_size=self.level.log_grid_size
        )

    def cover_of(self, b: np.ndarray, pool: np.ndarray) -> np.ndarray:
        if self.codes is not None:
            code = self._encode(b)
            pos = int(np.searchsorted(self.codes, code))
            if pos == len(self.codes) or self.codes[pos] != code:
                return np.empty(0, dtype=np.int64)
        else:
            hits = np.flatnonzero(np.all(self.keys == b, axis=1))
            if len(hits) == 0:
                return np.empty(0, dtype=np.int64)
            pos = int(hits[0])
        members = self.pair_point[self.inverse == pos]
        return members[pool[members]]


def _bernoulli_log(rng, log_p: float) -> bool:
    return rng.random() < math.exp(min(log_p, 0.0))


class SamplerBudgetExceeded(RuntimeError):
    """The rejection sampler used up its proposal budget without accepting."""


def _box_gaps(q, lo, hi, t):
    """Squared distance from each q to its box [t lo, t hi], and to the far corner."""
    low, high = t * lo, t * hi
    near = ((q - np.clip(q, low, high)) ** 2).sum(axis=1)
    far = (np.maximum(np.abs(q - low), np.abs(q - high)) ** 2).sum(axis=1)
    return near, far


def max_cover_bound(points: np.ndarray, level: GridLevel, a: float = 0.0, max_boxes: int = 2000) -> tuple[int, int]:
    """Branch and bound over boxes of grid indices for the largest cover count.

    Returns (upper, lower) with lower <= max_g c_g <= upper. The search stops
    once ``a * (upper - lower) <= 1`` or after ``max_boxes`` expansions. Box
    counts use a small relative slack so float rounding never undercounts.
    """
    points = np.asarray(points, dtype=float)
    if len(points) == 0:
        return 0, 0
    t, radius, bound = level.t, level.threshold, level.half_extent
    outer = level.sq_threshold * (1 + 1e-9)
    lo = np.maximum(-bound, np.floor((points.min(axis=0) - radius) / t)).astype(np.int64)
    hi = np.minimum(bound, np.ceil((points.max(axis=0) + radius) / t)).astype(np.int64)
    best = 0
    heap = [(-len(points), 0, lo, hi, np.arange(len(points)))]
    tick = 1
    for _ in range(max_boxes):
        if not heap:
            return best, best
        neg, _, lo, hi, inside = heapq.heappop(heap)
        upper = -neg
        if upper <= best or a * (upper - best) <= 1:
            return max(upper, best), best
        mid = (lo + hi) // 2
        near = _grid_sq_dist(np.broadcast_to(mid, (len(inside), level.dim)), points[inside], t)
        best = max(best, int((near < level.sq_threshold).sum()))
        if np.all(lo == hi):
            continue
        ax = int(np.argmax(hi - lo))
        left_hi, right_lo = hi.copy(), lo.copy()
        left_hi[ax], right_lo[ax] = mid[ax], mid[ax] + 1
        for l, h in ((lo, left_hi), (right_lo, hi)):
            gap, _ = _box_gaps(points[inside], l, h, t)
            members = inside[gap < outer]
            if len(members) > best:
                heapq.heappush(heap, (-len(members), tick, l, h, members))
                tick += 1
    upper = -heap[0][0] if heap else best
    return max(upper, best), best


class _Implicit:
    """Rejection sampler for the coverage exponential mechanism.

    The target mass exp(a c_g) of grid point g is split as 1 (the uniform
    part) plus, for each of the c_g points covering g, (e^{a c_g} - 1) / c_g.
    Proposals pick the uniform part, or a (point p, offset) pair with envelope
    M_p = (e^{a U_p} - 1) / U_p, where U_p bounds the cover of any grid point
    covering p: the pool inside twice the radius of p, capped by a branch and
    bound limit on the largest cover. (e^{ac} - 1) / c grows with c, so
    accepting with ratio ((e^{a c_g} - 1) / c_g) / M_p is exact.
    """

    batch = 512
    bound_boxes = 2000
    max_bound_boxes = 128_000
    refine_every = 50_000

    def __init__(self, points, live, level, offsets, eps_E, max_proposals=500_000):
        self.points = points
        self.level = level
        self.v = offsets.offsets
        self.a = 0.5 * eps_E
        self.max_proposals = int(max_proposals)
        self.log_u = math.log(len(self.v)) + level.dim * math.log(2.0)
        self.proposals = 0
        self._caps = None
        self._upper = None
        self._lower = 0
        self._upper_pool = 0
        self._boxes = self.bound_boxes

    def _cover(self, b, live):
        d2 = _grid_sq_dist(np.broadcast_to(b, (len(live), len(b))), self.points[live], self.level.t)
        return live[d2 < self.level.sq_threshold]

    def _loose(self) -> bool:
        return self._upper is not None and self.a * (self._upper - self._lower) > 1.0

    def _envelope(self, live, refresh=False):
        # Both bounds stay valid while the pool shrinks. The max-cover bound is
        # refreshed once enough points have left for it to be loose by a factor e.
        level, a = self.level, self.a
        pts = self.points[live]
        if self._caps is None:
            reach = 2.0 * level.threshold * (1 + 1e-9)
            self._caps = np.full(len(self.points), float(len(live)))
            if reach <= 2.0 + 1e-6:
                tree = cKDTree(pts)
                self._caps[live] = tree.query_ball_point(pts, reach, return_length=True)
        caps = np.minimum(self._caps[live], len(live))
        if a * caps.max() > 1.0:
            if refresh or self._upper is None or a * (self._upper_pool - len(live)) > 1.0:
                self._upper, self._lower = max_cover_bound(pts, level, a, self._boxes)
                self._upper_pool = len(live)
            caps = np.minimum(caps, max(self._upper, 1))
        log_env = log_expm1(a * caps) - np.log(caps)
        top = float(log_env.max())
        cdf = np.cumsum(np.exp(log_env - top))
        log_pairs = self.log_u + top + math.log(cdf[-1])
        uniform_share = math.exp(level.log_grid_size - float(np.logaddexp(level.log_grid_size, log_pairs)))
        return log_env, cdf, uniform_share

    def _counts(self, tree, live, g):
        """Exact cover counts of grid points ``g`` (rows of keys)."""
        level = self.level
        centers = level.t * g.astype(float)
        hi = tree.query_ball_point(centers, level.threshold * (1 + 1e-9), return_length=True)
        lo = tree.query_ball_point(centers, level.threshold * (1 - 1e-9), return_length=True)
        out = np.asarray(hi, dtype=np.int64)
        for i in np.flatnonzero(hi != lo):
            out[i] = len(self._cover(g[i], live))
        return out

    def draw(self, pool: np.ndarray, rng) -> np.ndarray:
        """One exact draw. Every trial uses a valid envelope, so tightening the
        max-cover bound after a run of rejections leaves the law unchanged."""
        level, a, dim = self.level, self.a, self.level.dim
        bound = level.half_extent
        live = np.flatnonzero(pool)
        if len(live) == 0:
            return rng.integers(-bound, bound + 1, size=dim)
        log_env, cdf, uniform_share = self._envelope(live)
        pts = self.points[live]
        tree = cKDTree(pts)
        spent = since_refine = 0
        while spent < self.max_proposals:
            if since_refine >= self.refine_every and self._loose() and self._boxes < self.max_bound_boxes:
                self._boxes *= 4
                log_env, cdf, uniform_share = self._envelope(live, refresh=True)
                since_refine = 0
            m = self.batch
            spent += m
            since_refine += m
            self.proposals += m
            take_uniform = rng.random(m) < uniform_share
            j = np.minimum(np.searchsorted(cdf, rng.random(m) * cdf[-1], side="right"), len(live) - 1)
            v = self.v[rng.integers(len(self.v), size=m)]
            s = rng.integers(0, 2, size=(m, dim)).astype(bool)
            b = floor_to_grid(pts[j], level.t) + np.where(s, 1 + v, -v)
            log_u = np.log1p(-rng.random(m))
            uniform = rng.integers(-bound, bound + 1, size=(m, dim))
            ok = ~take_uniform & np.all(np.abs(b) <= bound, axis=1)
            ok[ok] = _grid_sq_dist(b[ok], pts[j[ok]], level.t) < level.sq_threshold
            accept = take_uniform.copy()
            if ok.any():
                c = self._counts(tree, live, b[ok])
                ratio = log_expm1(a * c) - np.log(c) - log_env[j[ok]]
                accept[ok] = log_u[ok] < ratio
            hits = np.flatnonzero(accept)
            if len(hits):
                i = int(hits[0])
                return uniform[i] if take_uniform[i] else b[i]
        raise SamplerBudgetExceeded(
            f"no acceptance after {spent} proposals at level {level.index} "
            f"(d'={dim}, pool={len(live)}); a smaller d' or larger eps_E makes the law less peaked"
        )


def private_grid_set_cover(
    points: np.ndarray,
    pool: np.ndarray,
    level: GridLevel,
    kprime: int,
    eps_E: float,
    rng,
    *,
    offsets: OffsetSet | None = None,
    max_pairs: int = 4_000_000,
    max_proposals: int = 500_000,
) -> GridCoverResult:
    """k' rounds of private max coverage at one grid level.

    ``pool`` is a boolean mask over ``points`` and is updated in place: the
    points covered by each chosen grid point are removed. Rounds run even when
    nothing is left to cover (the draw is then uniform over the grid).
    ``eps_E = inf`` selects an exact maximum-cover point each round.
    """
    if kprime < 1:
        raise ValueError("k' must be >= 1")
    if not eps_E > 0:
        raise ValueError("eps_E must be positive")
    points = np.asarray(points, dtype=float)
    offsets = offsets or build_offsets(level, slack=1e-9)
    live = np.flatnonzero(pool)
    n_deltas = len(offsets) * 2**level.dim
    bound = level.half_extent

    def uniform(g):
        return g.integers(-bound, bound + 1, size=level.dim)

    if math.isinf(eps_E) or len(live) * n_deltas <= max_pairs:
        engine = _Enumerated(points, live, level, signed_offsets(offsets))
        mode = "enumerate"
    else:
        engine = _Implicit(points, live, level, offsets, eps_E, max_proposals)
        mode = "rejection"

    result = GridCoverResult(np.empty((0, level.dim)), np.empty((0, level.dim), dtype=np.int64), mode=mode)
    keys = []
    for _ in range(kprime):
        if mode == "enumerate":
            dist = engine.distribution(pool, eps_E)
            b = np.asarray(exp_mechanism_sample(dist, uniform, rng), dtype=np.int64)
            removed = engine.cover_of(b, pool)
        else:
            b = engine.draw(pool, rng)
            removed = engine._cover(b, np.flatnonzero(pool))
        keys.append(b)
        g = level.grid_point(b)
        pool[removed] = False
        for idx in removed:
            result.covered[int(idx)] = g
        result.round_cover.append(len(removed))
    result.grid_keys = np.array(keys, dtype=np.int64)
    result.centers = level.t * result.grid_keys.astype(float)
    return result
