"""Probability measures on R^1 and R^2.

All measures answer three queries: the CDF ``P(X <= x)``, the probability of
a half-open box ``[low, high)``, and seeded sampling.  Box queries are
vectorised: ``low`` and ``high`` may carry any leading batch shape, with the
coordinate axis last.

Points are passed as arrays whose last axis has length ``dim``.  For
one-dimensional measures a bare scalar or a 1-D array of scalars is also
accepted and treated as a batch of points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ._rng import generator

WEIGHT_TOL = 1e-12


def as_points(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to a float array with a trailing coordinate axis."""
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {x.shape}")
    return x


def _check_weights(w, what="weights") -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError(f"{what} must be a non-empty 1-D sequence")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError(f"{what} must be finite and non-negative")
    if abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise ValueError(f"{what} must sum to 1 (got {w.sum()!r})")
    return w


@dataclass(frozen=True)
class Rect:
    """Half-open box ``[low, high)``."""

    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        low = np.atleast_1d(np.asarray(self.low, dtype=float))
        high = np.atleast_1d(np.asarray(self.high, dtype=float))
        if low.shape != high.shape or low.ndim != 1:
            raise ValueError("low and high must be 1-D and of equal length")
        if not np.all(low < high):
            raise ValueError(f"empty box: low={low}, high={high}")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @property
    def dim(self) -> int:
        return self.low.size

    @property
    def center(self) -> np.ndarray:
        return (self.low + self.high) / 2

    def contains(self, z) -> np.ndarray:
        z = as_points(z, self.dim)
        return np.all((z >= self.low) & (z < self.high), axis=-1)

    def __eq__(self, other):
        if not isinstance(other, Rect):
            return NotImplemented
        return np.array_equal(self.low, other.low) and np.array_equal(self.high, other.high)

    def __hash__(self):
        return hash((self.low.tobytes(), self.high.tobytes()))


class Measure:
    """Base class.  Subclasses implement ``cdf``, ``box_prob`` and ``_draw``."""

    dim: int
    continuous: bool = True

    def cdf(self, x) -> np.ndarray:
        raise NotImplementedError

    def box_prob(self, low, high) -> np.ndarray:
        raise NotImplementedError

    def _draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def sample(self, n: int, seed=0) -> np.ndarray:
        """``n`` i.i.d. draws as an ``(n, dim)`` array, deterministic in ``seed``."""
        if n < 1:
            raise ValueError("n must be >= 1")
        return self._draw(generator(seed), int(n))

    def breakpoints(self, axis: int) -> np.ndarray:
        """Coordinates along ``axis`` where the density is not smooth."""
        return np.empty(0)

    def mean(self) -> np.ndarray:
        raise NotImplementedError

    def _bounds(self, low, high):
        low = as_points(low, self.dim)
        high = as_points(high, self.dim)
        return np.broadcast_arrays(low, high)


class Empirical(Measure):
    """Weighted point masses."""

    continuous = False

    def __init__(self, points, weights=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] not in (1, 2):
            raise ValueError("points must be an (m, d) array with d in {1, 2}")
        if weights is None:
            weights = np.full(pts.shape[0], 1.0 / pts.shape[0])
        w = _check_weights(weights)
        if w.size != pts.shape[0]:
            raise ValueError("one weight per point required")
        self.points = pts
        self.weights = w
        self.dim = pts.shape[1]
        if self.dim == 1:
            order = np.argsort(pts[:, 0], kind="stable")
            self._sorted = pts[order, 0]
            self._cum = np.concatenate([[0.0], np.cumsum(w[order])])

    def __repr__(self):
        return f"Empirical(n_points={len(self.weights)}, dim={self.dim})"

    def cdf(self, x):
        x = as_points(x, self.dim)
        if self.dim == 1:
            return self._cum[np.searchsorted(self._sorted, x[..., 0], side="right")]
        inside = np.all(self.points <= x[..., None, :], axis=-1)
        return np.clip(inside @ self.weights, 0.0, 1.0)

    def box_prob(self, low, high):
        low, high = self._bounds(low, high)
        if self.dim == 1:
            lo = np.searchsorted(self._sorted, low[..., 0], side="left")
            hi = np.searchsorted(self._sorted, high[..., 0], side="left")
            return np.where(hi > lo, self._cum[hi] - self._cum[np.minimum(lo, hi)], 0.0)
        out = np.empty(low.shape[:-1])
        flat_lo = low.reshape(-1, self.dim)
        flat_hi = high.reshape(-1, self.dim)
        flat = out.reshape(-1)
        step = max(1, 2_000_000 // max(1, len(self.weights)))
        for s in range(0, flat_lo.shape[0], step):
            lo = flat_lo[s:s + step, None, :]
            hi = flat_hi[s:s + step, None, :]
            inside = np.all((self.points >= lo) & (self.points < hi), axis=-1)
            flat[s:s + step] = inside @ self.weights
        return out

    def _draw(self, rng, n):
        idx = rng.choice(len(self.weights), size=n, p=self.weights)
        return self.points[idx].copy()

    def mean(self):
        return self.weights @ self.points

    def breakpoints(self, axis):
        return np.unique(self.points[:, axis])


def point_mass(location) -> Empirical:
    loc = np.atleast_1d(np.asarray(location, dtype=float))
    return Empirical(loc[None, :], [1.0])


def _interval_mass(a, b):
    """Standard normal mass of [a, b), evaluated on the tail nearer the interval."""
    upper = a > 0
    return np.where(upper, ndtr(-a) - ndtr(-b), ndtr(b) - ndtr(a))


class GaussianMixture(Measure):
    """Mixture of axis-aligned Gaussians (diagonal covariance)."""

    def __init__(self, means, variances, weights=None):
        mu = np.asarray(means, dtype=float)
        if mu.ndim == 1:
            mu = mu[:, None]
        var = np.asarray(variances, dtype=float)
        var = np.broadcast_to(var.reshape(var.shape + (1,) * (mu.ndim - var.ndim)), mu.shape).copy()
        if mu.ndim != 2 or mu.shape[1] not in (1, 2) or mu.shape[0] == 0:
            raise ValueError("means must be an (m, d) array with d in {1, 2}")
        if np.any(var <= 0):
            raise ValueError("variances must be positive")
        if weights is None:
            weights = np.full(mu.shape[0], 1.0 / mu.shape[0])
        w = _check_weights(weights)
        if w.size != mu.shape[0]:
            raise ValueError("one weight per component required")
        self.means = mu
        self.variances = var
        self.sigmas = np.sqrt(var)
        self.weights = w
        self.dim = mu.shape[1]

    def __repr__(self):
        return f"GaussianMixture(n_components={len(self.weights)}, dim={self.dim})"

    def cdf(self, x):
        x = as_points(x, self.dim)
        z = (x[..., None, :] - self.means) / self.sigmas
        return np.prod(ndtr(z), axis=-1) @ self.weights

    def box_prob(self, low, high):
        low, high = self._bounds(low, high)
        a = (low[..., None, :] - self.means) / self.sigmas
        b = (high[..., None, :] - self.means) / self.sigmas
        return np.clip(np.prod(_interval_mass(a, b), axis=-1) @ self.weights, 0.0, 1.0)

    def pdf(self, x):
        x = as_points(x, self.dim)
        z = (x[..., None, :] - self.means) / self.sigmas
        dens = np.exp(-0.5 * z**2) / (np.sqrt(2 * np.pi) * self.sigmas)
        return np.prod(dens, axis=-1) @ self.weights

    def _draw(self, rng, n):
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        return self.means[comp] + self.sigmas[comp] * rng.standard_normal((n, self.dim))

    def mean(self):
        return self.weights @ self.means


class BoxUniform(Measure):
    """Uniform density on a box."""

    def __init__(self, low, high):
        self.box = Rect(low, high)
        self.dim = self.box.dim
        self._width = self.box.high - self.box.low

    def __repr__(self):
        return f"BoxUniform(low={self.box.low.tolist()}, high={self.box.high.tolist()})"

    def cdf(self, x):
        x = as_points(x, self.dim)
        return np.prod(np.clip((x - self.box.low) / self._width, 0.0, 1.0), axis=-1)

    def box_prob(self, low, high):
        low, high = self._bounds(low, high)
        overlap = np.minimum(high, self.box.high) - np.maximum(low, self.box.low)
        return np.prod(np.clip(overlap, 0.0, None) / self._width, axis=-1)

    def _draw(self, rng, n):
        return self.box.low + self._width * rng.random((n, self.dim))

    def mean(self):
        return self.box.center

    def breakpoints(self, axis):
        return np.array([self.box.low[axis], self.box.high[axis]])


class Mixture(Measure):
    """Convex combination of measures, kept as an explicit list of terms."""

    def __init__(self, terms):
        terms = tuple((float(c), m) for c, m in terms)
        if not terms:
            raise ValueError("a mixture needs at least one term")
        _check_weights([c for c, _ in terms], "mixture coefficients")
        dims = {m.dim for _, m in terms}
        if len(dims) != 1:
            raise ValueError("all mixture terms must share a dimension")
        self.terms = terms
        self.dim = dims.pop()
        self.continuous = all(m.continuous for c, m in terms if c > 0)

    def __repr__(self):
        inner = ", ".join(f"{c:.4g}*{m!r}" for c, m in self.terms)
        return f"Mixture({inner})"

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms])

    def cdf(self, x):
        return sum(c * m.cdf(x) for c, m in self.terms if c > 0)

    def box_prob(self, low, high):
        low, high = self._bounds(low, high)
        out = np.zeros(low.shape[:-1])
        for c, m in self.terms:
            if c > 0:
                out = out + c * m.box_prob(low, high)
        return out

    def _draw(self, rng, n):
        coefs = self.coefficients
        which = rng.choice(len(coefs), size=n, p=coefs / coefs.sum())
        out = np.empty((n, self.dim))
        for j, (_, m) in enumerate(self.terms):
            sel = np.flatnonzero(which == j)
            if sel.size:
                out[sel] = m._draw(rng, sel.size)
        return out

    def mean(self):
        return sum(c * m.mean() for c, m in self.terms)

    def breakpoints(self, axis):
        pts = [m.breakpoints(axis) for c, m in self.terms if c > 0]
        return np.unique(np.concatenate(pts)) if pts else np.empty(0)


def mix(a: Measure, wa: float, b: Measure, wb: float) -> Mixture:
    """``wa * a + wb * b`` as a lazy two-term mixture."""
    if wa < 0 or wb < 0 or abs(wa + wb - 1.0) > WEIGHT_TOL:
        raise ValueError(f"mixture weights must be non-negative and sum to 1, got {wa}, {wb}")
    return Mixture([(wa, a), (wb, b)])


# Functional spellings of the query methods.

def cdf(m: Measure, x) -> np.ndarray:
    return m.cdf(x)


def rect_prob(m: Measure, r: Rect) -> float:
    return float(m.box_prob(r.low, r.high))


def sample(m: Measure, rng_seed, n: int) -> np.ndarray:
    return m.sample(n, rng_seed)
