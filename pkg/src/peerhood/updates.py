"""Additive belief updates.

An additive update mixes the prior with a kernel measure placed at the
observation: ``posterior = (1 - alpha) * prior + alpha * K_o``.  Two kernels
are provided: a point mass (the empirical update) and a hyper-pyramid whose
base centre is solved so that the observation maximises the agent's expected
neighbourhood payment.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DegeneratePaymentError, SolverError
from .measures import Empirical, Measure, Mixture, Rect, as_points, mix, point_mass
from .partitions import RegularPartitionSpace

_GL2 = np.array([-1.0, 1.0]) / np.sqrt(3.0)


def pyramid_box_mass(center, delta, apex, low, high) -> np.ndarray:
    """Mass of the unit-volume pyramid over ``[low, high)``; all arguments broadcast.

    The level set of the pyramid at relative height ``t`` is the base box
    shrunk towards the apex by ``1 - t``, so the mass is
    ``H * int_0^1 prod_i w_i(t) dt`` where ``w_i`` is the overlap of that
    level box with the query along axis ``i``.  Each ``w_i`` is piecewise
    linear with known breakpoints; two-point Gauss-Legendre per piece is exact
    for d <= 3.
    """
    center, delta, apex, low, high = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (center, delta, apex, low, high)))
    d = center.shape[-1]
    a = center - delta
    b = center + delta
    p = np.maximum(low, a)
    q = np.minimum(high, b)
    valid = np.all(q > p, axis=-1)
    up = b - apex
    dn = apex - a
    with np.errstate(divide="ignore", invalid="ignore"):
        t_q_up = np.where(up > 0, 1 - (q - apex) / up, 0.0)
        t_p_up = np.where(up > 0, 1 - (p - apex) / up, 0.0)
        t_p_dn = np.where(dn > 0, 1 - (apex - p) / dn, 0.0)
        t_q_dn = np.where(dn > 0, 1 - (apex - q) / dn, 0.0)
    zeros = np.zeros(center.shape[:-1] + (1,))
    knots = np.concatenate([zeros, zeros + 1, t_q_up, t_p_up, t_p_dn, t_q_dn], axis=-1)
    knots = np.sort(np.clip(np.nan_to_num(knots), 0.0, 1.0), axis=-1)
    half = (knots[..., 1:] - knots[..., :-1]) / 2
    mid = (knots[..., 1:] + knots[..., :-1]) / 2
    total = np.zeros(half.shape)
    for node in _GL2:
        t = mid + node * half                                  # (..., K)
        s = (1 - t)[..., None]                                 # (..., K, 1)
        hi_t = np.minimum(q[..., None, :], apex[..., None, :] + s * up[..., None, :])
        lo_t = np.maximum(p[..., None, :], apex[..., None, :] - s * dn[..., None, :])
        total += np.prod(np.clip(hi_t - lo_t, 0.0, None), axis=-1)
    height = (d + 1) / np.prod(2 * delta, axis=-1)
    mass = height * np.sum(total * half, axis=-1)
    return np.where(valid, np.clip(mass, 0.0, 1.0), 0.0)


def _pyramid_pdf(center, delta, apex, x):
    a = center - delta
    b = center + delta
    with np.errstate(divide="ignore", invalid="ignore"):
        gauge = np.where(x >= apex, (x - apex) / (b - apex), (apex - x) / (apex - a))
    gauge = np.nan_to_num(gauge, nan=0.0, posinf=np.inf)
    gauge = np.where((x < a) | (x > b), np.inf, gauge)
    height = (center.shape[-1] + 1) / np.prod(2 * delta, axis=-1)
    return height * np.clip(1 - gauge.max(axis=-1), 0.0, None)


class PyramidKernel(Measure):
    """Hyper-pyramid density: peak at ``apex``, zero on the boundary of ``[center - delta, center + delta]``."""

    def __init__(self, center, delta, apex):
        c = np.atleast_1d(np.asarray(center, dtype=float))
        dl = np.broadcast_to(np.asarray(delta, dtype=float), c.shape).copy()
        ap = np.atleast_1d(np.asarray(apex, dtype=float))
        if c.ndim != 1 or c.size not in (1, 2) or ap.shape != c.shape:
            raise ValueError("center and apex must be vectors of length 1 or 2")
        if np.any(dl <= 0):
            raise ValueError("half-widths must be positive")
        slack = 1e-12 * dl
        if np.any(ap < c - dl - slack) or np.any(ap > c + dl + slack):
            raise ValueError("apex must lie inside the pyramid base")
        self.center = c
        self.delta = dl
        self.apex = np.clip(ap, c - dl, c + dl)
        self.dim = c.size

    def __repr__(self):
        return (f"PyramidKernel(center={self.center.tolist()}, delta={self.delta.tolist()}, "
                f"apex={self.apex.tolist()})")

    @property
    def support(self) -> Rect:
        return Rect(self.center - self.delta, self.center + self.delta)

    @property
    def anchor(self) -> np.ndarray:
        return self.apex

    def box_prob(self, low, high):
        low, high = self._bounds(low, high)
        return pyramid_box_mass(self.center, self.delta, self.apex, low, high)

    def cdf(self, x):
        x = as_points(x, self.dim)
        return pyramid_box_mass(self.center, self.delta, self.apex, np.full_like(x, -np.inf), x)

    def pdf(self, x):
        return _pyramid_pdf(self.center, self.delta, self.apex, as_points(x, self.dim))

    def _draw(self, rng, n):
        # height from the layer-cake marginal, then uniform in that level box
        t = 1 - rng.random(n) ** (1.0 / (self.dim + 1))
        s = (1 - t)[:, None]
        lo = self.apex - s * (self.apex - self.center + self.delta)
        hi = self.apex + s * (self.center + self.delta - self.apex)
        return lo + (hi - lo) * rng.random((n, self.dim))

    def mean(self):
        return self.sample(200_000, 0).mean(axis=0)

    def breakpoints(self, axis):
        return np.array([self.center[axis] - self.delta[axis], self.apex[axis],
                         self.center[axis] + self.delta[axis]])


class PyramidCollection(Measure):
    """Weighted sum of many pyramids, evaluated in vectorised chunks."""

    def __init__(self, centers, deltas, apexes, weights=None):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.deltas = np.broadcast_to(np.asarray(deltas, dtype=float), self.centers.shape).copy()
        self.apexes = np.atleast_2d(np.asarray(apexes, dtype=float))
        m = self.centers.shape[0]
        self.weights = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float)
        if abs(self.weights.sum() - 1) > 1e-12:
            raise ValueError("weights must sum to 1")
        self.dim = self.centers.shape[1]

    @classmethod
    def from_kernels(cls, kernels):
        return cls([k.center for k in kernels], [k.delta for k in kernels], [k.apex for k in kernels])

    def __repr__(self):
        return f"PyramidCollection(n_kernels={len(self.weights)}, dim={self.dim})"

    def box_prob(self, low, high):
        low, high = self._bounds(low, high)
        shape = low.shape[:-1]
        lo = low.reshape(-1, self.dim)
        hi = high.reshape(-1, self.dim)
        out = np.zeros(lo.shape[0])
        a = self.centers - self.deltas
        b = self.centers + self.deltas
        step = max(1, 2_000_000 // max(1, lo.shape[0]))
        for s in range(0, len(self.weights), step):
            sl = slice(s, s + step)
            aa, bb = a[sl, None, :], b[sl, None, :]
            # whole support inside the box, or only part of it
            inside = np.all((lo[None] <= aa) & (hi[None] >= bb), axis=-1)
            touches = np.all((hi[None] > aa) & (lo[None] < bb), axis=-1)
            out += self.weights[sl] @ inside
            ki, ni = np.nonzero(touches & ~inside)
            if ki.size:
                ki = ki + s
                mass = pyramid_box_mass(self.centers[ki], self.deltas[ki], self.apexes[ki], lo[ni], hi[ni])
                np.add.at(out, ni, self.weights[ki] * mass)
        return np.clip(out, 0.0, 1.0).reshape(shape)

    def cdf(self, x):
        x = as_points(x, self.dim)
        return self.box_prob(np.full_like(x, -np.inf), x)

    def _draw(self, rng, n):
        idx = rng.choice(len(self.weights), size=n, p=self.weights)
        out = np.empty((n, self.dim))
        t = 1 - rng.random(n) ** (1.0 / (self.dim + 1))
        s = (1 - t)[:, None]
        c, dl, ap = self.centers[idx], self.deltas[idx], self.apexes[idx]
        lo = ap - s * (ap - c + dl)
        hi = ap + s * (c + dl - ap)
        out[:] = lo + (hi - lo) * rng.random((n, self.dim))
        return out


def pyramid_pdf_bin_mass(kernel: PyramidKernel, r: Rect) -> float:
    """Exact mass of ``kernel`` over the half-open box ``r``."""
    return float(kernel.box_prob(r.low, r.high))


# --------------------------------------------------------------------------
# additive updates

@dataclass(frozen=True)
class AdditiveUpdate:
    """Description of an additive update: ``alpha`` plus the kernel family."""

    alpha: float
    kernel_kind: str = "empirical"
    delta: tuple | None = None

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.kernel_kind not in ("empirical", "pyramid"):
            raise ValueError("kernel_kind must be 'empirical' or 'pyramid'")
        if self.kernel_kind == "pyramid" and self.delta is None:
            raise ValueError("pyramid kernels need delta")

    def apply(self, prior: Measure, o, ps: RegularPartitionSpace | None = None, **solver_kw) -> Measure:
        if self.kernel_kind == "empirical":
            return empirical_update(prior, o, self.alpha)
        kernel = solve_pe_apex(prior, o, self.delta, ps, self.alpha, **solver_kw)
        return additive_update(prior, kernel, self.alpha)


def additive_update(prior: Measure, kernel: Measure, alpha: float) -> Measure:
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    return mix(prior, 1.0 - alpha, kernel, alpha)


def empirical_update(prior: Measure, o, alpha: float) -> Measure:
    """Mix a point mass at the observation into the prior with weight ``alpha``."""
    o = np.atleast_1d(np.asarray(o, dtype=float))
    if o.size != prior.dim:
        raise ValueError("observation dimension does not match the prior")
    return additive_update(prior, point_mass(o), alpha)


# --------------------------------------------------------------------------
# bin-ratio face integrals

def bin_masses(m: Measure, ps: RegularPartitionSpace, centers) -> np.ndarray:
    """Mass of the bin-sized box centred at each point of ``centers``."""
    centers = as_points(centers, ps.dim)
    half = ps.bin_dims / 2
    return m.box_prob(centers - half, centers + half)


def _composite_nodes(lo, hi, breaks, panels, order):
    """Composite Gauss-Legendre nodes/weights on [lo, hi], panels anchored at ``breaks``."""
    cuts = np.unique(np.concatenate([[lo, hi], np.clip(breaks, lo, hi)]))
    lengths = np.diff(cuts)
    keep = lengths > (hi - lo) * 1e-13
    cuts = np.concatenate([cuts[:-1][keep], [hi]])
    lengths = np.diff(cuts)
    counts = np.maximum(1, np.round(panels * lengths / (hi - lo)).astype(int))
    edges = np.concatenate([np.linspace(c0, c1, k + 1)[:-1] for c0, c1, k in zip(cuts[:-1], cuts[1:], counts)]
                           + [[hi]])
    x, w = np.polynomial.legendre.leggauss(order)
    half = np.diff(edges) / 2
    mid = (edges[1:] + edges[:-1]) / 2
    nodes = (mid[:, None] + half[:, None] * x).reshape(-1)
    weights = (half[:, None] * w).reshape(-1)
    return nodes, weights


def face_integrals(ratio: Callable, o, ps: RegularPartitionSpace, kinks=None, panels: int = 256,
                   order: int = 3) -> np.ndarray:
    """Integrals of ``ratio`` over the opposing faces of the bin centred at ``o``.

    Returns a ``(d, 2)`` array: row ``i`` holds the lower- and upper-face
    integrals across axis ``i``.  In one dimension the faces are points and
    the "integral" is the value there.  ``kinks[j]`` lists coordinates along
    axis ``j`` where the integrand's ingredients are not smooth; the
    composite rule is anchored at every place a bin edge crosses one.
    """
    o = np.atleast_1d(np.asarray(o, dtype=float))
    l = ps.bin_dims
    d = ps.dim
    if d == 1:
        vals = ratio(np.array([[o[0] - l[0] / 2], [o[0] + l[0] / 2]]))
        return np.asarray(vals, dtype=float).reshape(1, 2)
    pts, wts, slots = [], [], []
    for i in range(d):
        j = 1 - i
        k = np.asarray(kinks[j] if kinks is not None else [], dtype=float)
        # bin [w - l/2, w + l/2) with w = o_j + y has an edge on k when y = k - o_j -+ l/2
        breaks = np.concatenate([k - o[j] - l[j] / 2, k - o[j] + l[j] / 2])
        y, w = _composite_nodes(-l[j] / 2, l[j] / 2, breaks, panels, order)
        for side, sign in enumerate((-1.0, 1.0)):
            p = np.empty((y.size, d))
            p[:, i] = o[i] + sign * l[i] / 2
            p[:, j] = o[j] + y
            pts.append(p)
            wts.append(w)
            slots.append((i, side))
    vals = np.asarray(ratio(np.concatenate(pts)), dtype=float)
    out = np.empty((d, 2))
    start = 0
    for p, w, (i, side) in zip(pts, wts, slots):
        out[i, side] = w @ vals[start:start + len(w)]
        start += len(w)
    return out


def ratio_function(prior: Measure, posterior: Measure, ps: RegularPartitionSpace) -> Callable:
    """``Q(w)``: posterior over prior mass of the bin centred at ``w``."""
    def q(centers):
        den = bin_masses(prior, ps, centers)
        num = bin_masses(posterior, ps, centers)
        if np.any((den <= 0) & (num > 0)):
            raise DegeneratePaymentError("posterior puts mass on a bin the prior gives zero probability")
        # an empty bin pays nothing, whatever its prior mass
        return np.where(num > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return q


def measure_kinks(*measures: Measure, dim: int) -> list:
    return [np.unique(np.concatenate([m.breakpoints(j) for m in measures])) for j in range(dim)]


# --------------------------------------------------------------------------
# PE apex solver

@dataclass
class SolveInfo:
    converged: bool
    iterations: int
    residuals: np.ndarray
    face_integrals: np.ndarray
    relative_residual: float
    quadrature_error: float
    bracket: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "residuals": self.residuals.tolist(),
            "face_integrals": self.face_integrals.tolist(),
            "relative_residual": self.relative_residual,
            "quadrature_error": self.quadrature_error,
        }


class _PeResiduals:
    """Face residuals ``F_i(x) = S_upper_i - S_lower_i`` for a pyramid centred at ``x``."""

    def __init__(self, prior, o, delta, ps, alpha, panels, order=3):
        self.prior, self.o, self.delta, self.ps = prior, o, delta, ps
        self.alpha, self.panels, self.order = alpha, panels, order
        self.prior_kinks = [prior.breakpoints(j) for j in range(ps.dim)]
        self.evaluations = 0

    def faces(self, x, panels=None):
        kernel = PyramidKernel(x, self.delta, self.o)
        half = self.ps.bin_dims / 2
        alpha = self.alpha

        def q(centers):
            den = self.prior.box_prob(centers - half, centers + half)
            if np.any(den <= 0):
                raise SolverError("prior has a zero-probability bin on a face of the observation's bin")
            num = kernel.box_prob(centers - half, centers + half)
            return (1 - alpha) + alpha * num / den

        kinks = [np.concatenate([self.prior_kinks[j], kernel.breakpoints(j)]) for j in range(self.ps.dim)]
        self.evaluations += 1
        return face_integrals(q, self.o, self.ps, kinks, panels or self.panels, self.order)

    def __call__(self, x):
        s = self.faces(x)
        return s[:, 1] - s[:, 0], s


def _bracket_points(o, delta, i, sign):
    """Points on the face ``x_i = o_i + sign * delta_i`` of the search box."""
    d = o.size
    others = [np.array([o[j] - delta[j], o[j], o[j] + delta[j]]) for j in range(d) if j != i]
    grids = np.meshgrid(*others, indexing="ij") if others else []
    count = grids[0].size if grids else 1
    pts = np.tile(o, (count, 1))
    pts[:, i] = o[i] + sign * delta[i]
    col = 0
    for j in range(d):
        if j != i:
            pts[:, j] = grids[col].reshape(-1)
            col += 1
    return pts


def solve_pe_apex(prior: Measure, o, delta, ps: RegularPartitionSpace, alpha: float = 1.0,
                  tol: float = 1e-8, max_iter: int = 500, panels: int = 256, fd_step: float = 1e-5,
                  check_bracket: bool = True, full_output: bool = False):
    """Find the pyramid base centre that balances the bin-face integrals.

    The pyramid has its peak at ``o`` and half-widths ``delta``; its base
    centre ``x`` is searched in ``[o - delta, o + delta]`` by minimising
    ``G(x) = sum_i F_i(x)**2`` with projected gradient descent.  Each step is
    scaled by the diagonal of ``J^T J`` (``J`` the central-difference Jacobian
    of ``F``) and accepted through Armijo backtracking.  Convergence means
    ``|F_i| <= tol * max |S|`` for every axis.

    Returns the kernel, or ``(kernel, SolveInfo)`` when ``full_output``.
    """
    o = np.atleast_1d(np.asarray(o, dtype=float))
    delta = np.broadcast_to(np.asarray(delta, dtype=float), o.shape).copy()
    if ps is None or ps.dim != o.size or prior.dim != o.size:
        raise ValueError("prior, observation and partition space must share a dimension")
    if np.any(delta <= 0) or np.any(delta > ps.bin_dims / 2 * (1 + 1e-12)):
        raise ValueError("need 0 < delta <= l / 2 so the kernel stays bin-bounded")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    res = _PeResiduals(prior, o, delta, ps, alpha, panels)
    lo_box, hi_box = o - delta, o + delta
    d = o.size

    bracket = {}
    if check_bracket:
        for i in range(d):
            for sign in (-1.0, 1.0):
                vals = np.array([res(p)[0][i] for p in _bracket_points(o, delta, i, sign)])
                bracket[(i, int(sign))] = vals.tolist()
                if np.any(sign * vals <= 0):
                    raise SolverError(
                        f"sign condition fails on face x_{i} = o_{i} {'+' if sign > 0 else '-'} delta_{i}",
                        residuals=vals)

    h = fd_step * ps.bin_dims

    def jacobian(x):
        J = np.empty((d, d))
        for j in range(d):
            up = x.copy()
            dn = x.copy()
            up[j] = min(x[j] + h[j], hi_box[j])
            dn[j] = max(x[j] - h[j], lo_box[j])
            J[:, j] = (res(up)[0] - res(dn)[0]) / (up[j] - dn[j])
        return J

    x = o.copy()
    F, S = res(x)
    converged = False
    it = 0
    for it in range(max_iter + 1):
        if np.all(np.abs(F) <= tol * np.abs(S).max()):
            converged = True
            break
        if it == max_iter:
            break
        J = jacobian(x)
        g = J.T @ F
        scale = np.einsum("ij,ij->j", J, J)
        scale = np.where(scale > 0, scale, 1.0)
        step = -g / scale
        G0 = F @ F
        s = 1.0
        moved = False
        while s > 1e-14:
            x_new = np.clip(x + s * step, lo_box, hi_box)
            F_new, S_new = res(x_new)
            if F_new @ F_new <= G0 + 1e-4 * 2 * g @ (x_new - x):
                moved = True
                break
            s /= 2
        if not moved:
            break
        x, F, S = x_new, F_new, S_new

    kernel = PyramidKernel(x, delta, o)
    rel = float(np.max(np.abs(F)) / np.abs(S).max())
    if not converged:
        raise SolverError(f"apex solver stopped after {it} iterations with relative residual {rel:.3e}",
                          residuals=F, iterations=it)
    coarse = res.faces(x, panels=max(1, panels // 2))
    quad_err = float(np.max(np.abs(S - coarse)) / (2 ** (2 * res.order) - 1))
    info = SolveInfo(True, it, F, S, rel, quad_err, bracket)
    kernel.solve_info = info
    return (kernel, info) if full_output else kernel


# --------------------------------------------------------------------------
# update sequences

def sequence_alpha(k: int, i: int) -> float:
    """Mixing weight of the ``i``-th update (1-based) for pseudo-count ``k``."""
    return 1.0 / (k + i)


def next_alpha(alpha: float) -> float:
    """Weight that keeps equal kernel weights after one more update."""
    return alpha / (1 + alpha)


def average_kernels(kernels) -> Measure:
    """Equal-weight average of kernels, grouped by type for fast evaluation."""
    kernels = list(kernels)
    groups: dict = {}
    for kern in kernels:
        if isinstance(kern, Empirical) and len(kern.weights) == 1:
            groups.setdefault("point", []).append(kern)
        elif isinstance(kern, PyramidKernel):
            groups.setdefault("pyramid", []).append(kern)
        else:
            groups.setdefault("other", []).append(kern)
    parts = []
    for kind, ks in groups.items():
        if kind == "point":
            m = Empirical(np.array([kk.points[0] for kk in ks]))
        elif kind == "pyramid":
            m = PyramidCollection.from_kernels(ks)
        else:
            m = Mixture([(1.0 / len(ks), kk) for kk in ks])
        parts.append((len(ks) / len(kernels), m))
    if len(parts) == 1:
        return parts[0][1]
    coefs = np.array([c for c, _ in parts])
    coefs[-1] = 1.0 - coefs[:-1].sum()
    return Mixture(zip(coefs, [m for _, m in parts]))


@dataclass(frozen=True)
class UpdateSequenceState:
    """Prior with pseudo-count ``k`` plus the kernels accumulated so far."""

    k: int
    prior: Measure
    kernels: tuple = ()
    observations: tuple = ()

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")

    @property
    def n(self) -> int:
        return len(self.kernels)

    def terms(self) -> list:
        """The closed form ``k/(k+n) prior + sum_i 1/(k+n) K_i`` as explicit terms."""
        tot = self.k + self.n
        return [(self.k / tot, self.prior)] + [(1.0 / tot, kern) for kern in self.kernels]

    @property
    def posterior(self) -> Measure:
        if self.n == 0:
            return self.prior
        tot = self.k + self.n
        return mix(self.prior, self.k / tot, average_kernels(self.kernels), self.n / tot)


def sequence_update(state: UpdateSequenceState, o, kernel_builder: Callable) -> UpdateSequenceState:
    """Append the kernel for observation ``o``; the builder gets ``(o, i, state)``."""
    o = np.atleast_1d(np.asarray(o, dtype=float))
    kernel = kernel_builder(o, state.n + 1, state)
    return replace(state, kernels=state.kernels + (kernel,), observations=state.observations + (o,))


def sequential_posterior(state: UpdateSequenceState) -> Measure:
    """Fold the updates one at a time, ``U_{k+i-1}(pi, o_i)``; nests one mixture per step."""
    post = state.prior
    for i, kern in enumerate(state.kernels, start=1):
        a = sequence_alpha(state.k, i)
        post = mix(post, 1 - a, kern, a)
    return post


def empirical_kernel(o, i=None, state=None) -> Empirical:
    return point_mass(o)


@dataclass(frozen=True)
class PyramidBuilder:
    """Pyramid kernels with half-widths ``delta0 / i``.

    ``mode='centered'`` puts the base centre on the observation;
    ``mode='pe'`` solves the base centre against the current posterior.
    """

    delta0: tuple
    mode: str = "centered"
    ps: RegularPartitionSpace | None = None

    def __call__(self, o, i, state=None):
        delta = np.asarray(self.delta0, dtype=float) / i
        if self.mode == "centered":
            return PyramidKernel(o, delta, o)
        if self.mode == "pe":
            if state is None or self.ps is None:
                raise ValueError("PE mode needs the sequence state and a partition space")
            return solve_pe_apex(state.posterior, o, delta, self.ps, sequence_alpha(state.k, i))
        raise ValueError("mode must be 'centered' or 'pe'")


def kernel_anchor(kernel: Measure) -> np.ndarray:
    if isinstance(kernel, PyramidKernel):
        return kernel.apex
    if isinstance(kernel, Empirical) and len(kernel.weights) == 1:
        return kernel.points[0]
    raise TypeError("kernel has no anchor point")


# --------------------------------------------------------------------------
# convergence diagnostics

DEFAULT_EPS = (0.2, 0.1, 0.05, 0.02, 0.01, 0.005)


def dkw_band(n: int, alpha: float = 0.01) -> float:
    """Dvoretzky-Kiefer-Wolfowitz half-width at confidence ``1 - alpha``."""
    return float(np.sqrt(np.log(2 / alpha) / (2 * n)))


@dataclass
class ConvergenceReport:
    n: int
    ks_distance: float
    eps: np.ndarray
    concentration: np.ndarray

    def concentration_avg(self, eps: float) -> float:
        """Average concentration at ``eps`` (interpolated on the ladder)."""
        order = np.argsort(self.eps)
        return float(np.interp(eps, self.eps[order], self.concentration[order]))

    def to_dict(self) -> dict:
        return {"n": self.n, "ks_distance": self.ks_distance, "eps": self.eps.tolist(),
                "concentration": self.concentration.tolist()}


def concentration(kernel: Measure, eps: float) -> float:
    """``P(|X - o|_inf >= eps)`` for ``X`` drawn from the kernel anchored at ``o``."""
    o = kernel_anchor(kernel)
    return float(1.0 - kernel.box_prob(o - eps, o + eps))


def convergence_report(state: UpdateSequenceState, truth: Measure, eval_grid, eps=DEFAULT_EPS) -> ConvergenceReport:
    grid = as_points(eval_grid, truth.dim).reshape(-1, truth.dim)
    if grid.shape[0] == 0:
        raise ValueError("eval_grid must be non-empty")
    ks = float(np.max(np.abs(state.posterior.cdf(grid) - truth.cdf(grid))))
    eps = np.asarray(eps, dtype=float)
    if state.n == 0:
        conc = np.zeros_like(eps)
    elif all(isinstance(kern, PyramidKernel) for kern in state.kernels):
        c = np.array([kern.center for kern in state.kernels])
        dl = np.array([kern.delta for kern in state.kernels])
        o = np.array([kern.apex for kern in state.kernels])
        conc = np.array([np.mean(1.0 - pyramid_box_mass(c, dl, o, o - e, o + e)) for e in eps])
    elif all(isinstance(kern, Empirical) and len(kern.weights) == 1 for kern in state.kernels):
        # a point mass never leaves its own eps-box
        conc = np.where(eps > 0, 0.0, 1.0)
    else:
        conc = np.array([np.mean([concentration(kern, e) for kern in state.kernels]) for e in eps])
    return ConvergenceReport(state.n, ks, eps, conc)
