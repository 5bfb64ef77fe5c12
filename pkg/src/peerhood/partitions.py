"""Regular partition spaces: translated rectangular grids with a uniform shift.

Bin ``n`` (an integer vector) under shift ``theta`` is the half-open box

    [l * (n - 1/2) + theta, l * (n + 1/2) + theta)

and the shift is drawn uniformly from ``[0, l)`` in every coordinate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ._rng import generator
from .measures import Measure, Rect, as_points


@dataclass(frozen=True)
class RegularPartitionSpace:
    bin_dims: np.ndarray

    def __post_init__(self):
        l = np.atleast_1d(np.asarray(self.bin_dims, dtype=float))
        if l.ndim != 1 or l.size not in (1, 2):
            raise ValueError("bin_dims must hold 1 or 2 side lengths")
        if not np.all(l > 0) or not np.all(np.isfinite(l)):
            raise ValueError("bin side lengths must be positive")
        object.__setattr__(self, "bin_dims", l)

    @property
    def dim(self) -> int:
        return self.bin_dims.size

    @property
    def volume(self) -> float:
        return float(np.prod(self.bin_dims))

    def __eq__(self, other):
        return isinstance(other, RegularPartitionSpace) and np.array_equal(self.bin_dims, other.bin_dims)

    def __hash__(self):
        return hash(self.bin_dims.tobytes())

    def check_theta(self, theta) -> np.ndarray:
        theta = as_points(theta, self.dim)
        if np.any(theta < 0) or np.any(theta >= self.bin_dims):
            raise ValueError("theta must lie in [0, l) in every coordinate")
        return theta

    def lower_face(self, theta, n) -> np.ndarray:
        """Lower corner of bin ``n``; the upper corner is ``lower_face(theta, n + 1)``."""
        l = self.bin_dims
        return theta + l * n - l / 2

    def select(self, theta, z) -> np.ndarray:
        """Vectorised bin selection; ``theta`` and ``z`` broadcast."""
        theta = as_points(theta, self.dim)
        z = as_points(z, self.dim)
        n = np.floor((z - theta) / self.bin_dims + 0.5)
        # floor() can land one bin off when z sits on a face; settle it
        # against the same face arithmetic bin_rect uses.
        n = np.where(z < self.lower_face(theta, n), n - 1, n)
        n = np.where(z >= self.lower_face(theta, n + 1), n + 1, n)
        return n.astype(np.int64)

    def rect_bounds(self, theta, n):
        """``(low, high)`` arrays of bins ``n`` under ``theta`` (vectorised)."""
        theta = as_points(theta, self.dim)
        n = np.asarray(n, dtype=float)
        if self.dim == 1 and (n.ndim == 0 or n.shape[-1] != 1):
            n = n[..., None]
        return self.lower_face(theta, n), self.lower_face(theta, n + 1)

    def center(self, theta, n) -> np.ndarray:
        theta = as_points(theta, self.dim)
        return theta + self.bin_dims * np.asarray(n, dtype=float)

    def bin_range(self, theta, region: Rect):
        """Per-axis inclusive index ranges of the bins meeting ``region``."""
        theta = as_points(theta, self.dim)
        lo = self.select(theta, region.low)
        # the last bin touched is the one containing the point just below high
        hi = self.select(theta, np.nextafter(region.high, -np.inf))
        return lo, hi

    def bins_in(self, theta, region: Rect) -> np.ndarray:
        """All bin indices meeting ``region`` for a single ``theta``, as (m, d)."""
        lo, hi = self.bin_range(theta, region)
        lo, hi = lo.reshape(-1), hi.reshape(-1)
        axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
        return np.array(list(itertools.product(*axes)), dtype=np.int64).reshape(-1, self.dim)

    def sample_theta(self, n: int, seed=0) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = generator(seed)
        theta = rng.random((int(n), self.dim)) * self.bin_dims
        return np.minimum(theta, np.nextafter(self.bin_dims, 0))

    def theta_grid(self, n: int) -> np.ndarray:
        """Midpoint grid with about ``n`` shifts (``ceil(n ** (1/d))`` per axis)."""
        per_axis = int(np.ceil(round(n ** (1.0 / self.dim), 9)))
        axes = [(np.arange(per_axis) + 0.5) * l / per_axis for l in self.bin_dims]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def bin_select(ps: RegularPartitionSpace, theta, z) -> np.ndarray:
    """Index of the bin containing ``z`` under shift ``theta``."""
    theta = ps.check_theta(theta)
    return ps.select(theta, z)


def bin_rect(ps: RegularPartitionSpace, theta, n) -> Rect:
    low, high = ps.rect_bounds(ps.check_theta(theta), n)
    return Rect(low.reshape(-1), high.reshape(-1))


def sample_theta(ps: RegularPartitionSpace, rng_seed, n: int) -> np.ndarray:
    return ps.sample_theta(n, rng_seed)


@dataclass(frozen=True)
class ContractedPartition:
    """A partition with zero-probability bins folded into their nearest positive bin."""

    space: RegularPartitionSpace
    theta: np.ndarray
    region: Rect
    merge_map: dict = field(default_factory=dict)
    probabilities: dict = field(default_factory=dict)

    def map(self, n) -> tuple:
        key = tuple(int(v) for v in np.atleast_1d(n))
        return self.merge_map.get(key, key)

    def map_many(self, ns) -> np.ndarray:
        ns = np.asarray(ns, dtype=np.int64).reshape(-1, self.space.dim)
        return np.array([self.map(n) for n in ns], dtype=np.int64).reshape(ns.shape)

    def members(self, target) -> list:
        """All original bins (within the region) that map onto ``target``."""
        target = tuple(int(v) for v in np.atleast_1d(target))
        out = [k for k, v in self.merge_map.items() if v == target]
        return [target] + sorted(k for k in out if k != target)


def contract(ps: RegularPartitionSpace, theta, R: Measure, region: Rect) -> ContractedPartition:
    """Redirect every zero-``R`` bin meeting ``region`` to the nearest positive bin.

    Distance is Euclidean between bin centres; ties go to the lexicographically
    smallest index.
    """
    theta = ps.check_theta(theta).reshape(-1)
    bins = ps.bins_in(theta, region)
    low, high = ps.rect_bounds(theta, bins)
    probs = R.box_prob(low, high)
    positive = probs > 0
    if not positive.any():
        raise ValueError("R gives no positive-probability bin inside the region")
    pos_bins = bins[positive]
    order = np.lexsort(pos_bins.T[::-1])
    pos_bins = pos_bins[order]
    merge = {}
    for n, p in zip(bins, probs):
        key = tuple(int(v) for v in n)
        if p > 0:
            merge[key] = key
            continue
        dist = np.sqrt((((pos_bins - n) * ps.bin_dims) ** 2).sum(axis=1))
        # argmin returns the first minimum, i.e. the lexicographically smallest
        merge[key] = tuple(int(v) for v in pos_bins[np.argmin(dist)])
    return ContractedPartition(
        ps, theta, region, merge,
        {tuple(int(v) for v in n): float(p) for n, p in zip(bins, probs)},
    )


@dataclass(frozen=True)
class BinSupportReport:
    violation_rate: float
    n_theta: int
    seed: int


def check_bin_supported(ps: RegularPartitionSpace, R: Measure, support_points, theta_samples: int,
                        rng_seed: int = 0) -> BinSupportReport:
    """Fraction of shifts putting some support point in a zero-``R`` bin."""
    pts = as_points(support_points, ps.dim).reshape(-1, ps.dim)
    if pts.shape[0] == 0:
        raise ValueError("support_points must be non-empty")
    thetas = ps.sample_theta(theta_samples, rng_seed)
    n = ps.select(thetas[:, None, :], pts[None, :, :])
    low, high = ps.rect_bounds(thetas[:, None, :], n)
    zero = R.box_prob(low, high) <= 0
    return BinSupportReport(float(np.mean(zero.any(axis=1))), int(theta_samples), int(rng_seed))


def separation_probability(ps: RegularPartitionSpace, z1, z2) -> float:
    """Exact probability over the uniform shift that ``z1`` and ``z2`` fall in different bins."""
    gap = np.abs(np.asarray(z1, float) - np.asarray(z2, float)).reshape(-1)
    together = np.prod(np.clip(1.0 - gap / ps.bin_dims, 0.0, 1.0))
    return float(1.0 - together)
