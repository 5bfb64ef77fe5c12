"""Slow, independent reference computations used by the tests.

They avoid the package's vectorised code paths: bins are found by scanning
edges in plain Python and atoms are counted one by one.
"""

import math

import numpy as np
from scipy import stats


def bin_of(z, theta, l):
    """Index n with l*(n - 1/2) + theta <= z < l*(n + 1/2) + theta, found by walking."""
    n = int(round((z - theta) / l))
    while z < l * (n - 0.5) + theta:
        n -= 1
    while z >= l * (n + 0.5) + theta:
        n += 1
    return n


def atom_mass(points, weights, lo, hi):
    return sum(w for p, w in zip(points, weights) if lo <= p < hi)


def ptne_grid_1d(points, weights, l, r, rr, n_grid, c=1.0):
    """Neighbourhood payment for an empirical 1D public prior on a midpoint shift grid."""
    total = 0.0
    for k in range(n_grid):
        theta = (k + 0.5) * l / n_grid
        n = bin_of(r, theta, l)
        if n != bin_of(rr, theta, l):
            continue
        lo, hi = l * (n - 0.5) + theta, l * (n + 0.5) + theta
        total += c / atom_mass(points, weights, lo, hi)
    return total / n_grid


def expected_pay_grid_1d(points, weights, peer_points, peer_weights, l, report, n_grid, c=1.0):
    """Shift-grid expectation with the exact inner peer expectation (empirical peers)."""
    total = 0.0
    for k in range(n_grid):
        theta = (k + 0.5) * l / n_grid
        n = bin_of(report, theta, l)
        lo, hi = l * (n - 0.5) + theta, l * (n + 0.5) + theta
        peer = atom_mass(peer_points, peer_weights, lo, hi)
        if peer > 0:
            total += peer * c / atom_mass(points, weights, lo, hi)
    return total / n_grid


def triangle_mass(center, delta, apex, lo, hi):
    """Mass of the triangular density on [center - delta, center + delta] with mode ``apex``."""
    a = center - delta
    dist = stats.triang(min(max((apex - a) / (2 * delta), 0.0), 1.0), loc=a, scale=2 * delta)
    return dist.cdf(hi) - dist.cdf(lo)


def pe_residual_1d(prior_mass, o, x, delta, l, alpha=1.0):
    """F(x) = Q(o + l/2) - Q(o - l/2) for a triangular kernel; ``prior_mass(lo, hi)``."""
    q = []
    for w in (o - l / 2, o + l / 2):
        lo, hi = w - l / 2, w + l / 2
        q.append((1 - alpha) + alpha * triangle_mass(x, delta, o, lo, hi) / prior_mass(lo, hi))
    return q[1] - q[0]


def riemann_box_2d(pdf, support_lo, support_hi, lo, hi, n):
    """Midpoint Riemann sum of ``pdf`` over box [lo, hi) on an n x n grid aligned to that box."""
    lo = np.maximum(lo, support_lo)
    hi = np.minimum(hi, support_hi)
    if np.any(hi <= lo):
        return 0.0
    h = (hi - lo) / n
    xs = lo[0] + (np.arange(n) + 0.5) * h[0]
    ys = lo[1] + (np.arange(n) + 0.5) * h[1]
    total = 0.0
    for x in np.array_split(xs, 16):
        X, Y = np.meshgrid(x, ys, indexing="ij")
        total += pdf(np.stack([X.ravel(), Y.ravel()], axis=-1)).sum()
    return float(total * h[0] * h[1])


def dkw(n, alpha=0.01):
    return math.sqrt(math.log(2 / alpha) / (2 * n))


def pyramid_pdf(center, delta, apex, x):
    """Hyper-pyramid density written out directly from its definition."""
    x = np.atleast_2d(x)
    a, b = center - delta, center + delta
    gauge = np.zeros(x.shape[0])
    for i in range(x.shape[1]):
        up = np.where(b[i] > apex[i], (x[:, i] - apex[i]) / max(b[i] - apex[i], 1e-300), np.inf)
        dn = np.where(apex[i] > a[i], (apex[i] - x[:, i]) / max(apex[i] - a[i], 1e-300), np.inf)
        g = np.where(x[:, i] >= apex[i], up, dn)
        g = np.where((x[:, i] < a[i]) | (x[:, i] > b[i]), np.inf, g)
        gauge = np.maximum(gauge, g)
    height = (x.shape[1] + 1) / np.prod(2 * delta)
    return height * np.clip(1 - gauge, 0, None)


def pe_residual_grid_1d(prior_mass, o, xs, delta, l, alpha=1.0):
    """``pe_residual_1d`` over an array of base centres; the two prior bin masses are fixed."""
    xs = np.asarray(xs, dtype=float)
    a = xs - delta
    shape = np.clip((o - a) / (2 * delta), 0.0, 1.0)
    q = []
    for w in (o - l / 2, o + l / 2):
        lo, hi = w - l / 2, w + l / 2
        k = stats.triang.cdf(hi, shape, loc=a, scale=2 * delta) - stats.triang.cdf(lo, shape, loc=a, scale=2 * delta)
        q.append((1 - alpha) + alpha * k / prior_mass(lo, hi))
    return q[1] - q[0]


def gmm_mass_1d(means, var, weights, lo, hi):
    s = math.sqrt(2 * var)
    return sum(w * 0.5 * (math.erf((hi - m) / s) - math.erf((lo - m) / s)) for m, w in zip(means, weights))


def ptne_grid_gmm_1d(means, var, weights, l, r, rr, n_grid, c=1.0):
    """Neighbourhood payment for a 1D Gaussian-mixture public prior on a midpoint shift grid."""
    total = 0.0
    for k in range(n_grid):
        theta = (k + 0.5) * l / n_grid
        n = bin_of(r, theta, l)
        if n != bin_of(rr, theta, l):
            continue
        total += c / gmm_mass_1d(means, var, weights, l * (n - 0.5) + theta, l * (n + 0.5) + theta)
    return total / n_grid
