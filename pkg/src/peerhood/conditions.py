"""Checks of the update conditions that make truthful reporting optimal.

All checks use PTS scoring, where the payment-relevant quantity for a bin is
the ratio of posterior to prior mass.  Margins are signed: positive means the
observation wins with slack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegeneratePaymentError
from .measures import Measure, Rect, as_points
from .mechanism import PtsConfig, _thetas, payment_table
from .partitions import RegularPartitionSpace
from .updates import _composite_nodes, face_integrals, ratio_function

BOUNDARY_TOL = 1e-8


@dataclass
class ConditionReport:
    condition: str
    passed: bool
    worst_margin: float
    violating_theta_fraction: float | None
    competitor_at_worst: list | None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "violating_theta_fraction": self.violating_theta_fraction,
            "competitor_at_worst": self.competitor_at_worst,
            "details": self.details,
        }


def _posterior(posterior_builder, prior, o) -> Measure:
    if isinstance(posterior_builder, Measure):
        return posterior_builder
    return posterior_builder(prior, o)


def check_natural(prior: Measure, posterior: Measure, ps: RegularPartitionSpace, theta, o, competitors,
                  scoring=None) -> ConditionReport:
    """Is ``posterior(bin) * score(prior(bin))`` strictly largest at the observation's bin?"""
    scoring = scoring or PtsConfig()
    theta = ps.check_theta(theta).reshape(-1)
    n_o = ps.select(theta, o).reshape(-1)
    comps = np.asarray(competitors, dtype=np.int64).reshape(-1, ps.dim)
    comps = comps[np.any(comps != n_o, axis=1)]
    bins = np.vstack([n_o[None], comps])
    low, high = ps.rect_bounds(theta, bins)
    pri = prior.box_prob(low, high)
    if np.any(pri <= 0):
        raise DegeneratePaymentError("a referenced bin has zero prior probability")
    value = posterior.box_prob(low, high) * scoring.score(pri)
    if comps.shape[0] == 0:
        return ConditionReport("natural", True, float("inf"), 0.0, None)
    j = int(np.argmax(value[1:]))
    margin = float(value[0] - value[1:][j])
    return ConditionReport("natural", margin > 0, margin, 0.0 if margin > 0 else 1.0, comps[j].tolist(),
                           {"observation_bin": n_o.tolist(), "observation_value": float(value[0])})


def _region_bins(ps, thetas, region: Rect):
    """Candidate bins covering ``region`` for all shifts, plus a per-shift mask of those meeting it."""
    lo, hi = ps.bin_range(thetas, region)
    axes = [np.arange(lo[:, i].min(), hi[:, i].max() + 1) for i in range(ps.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    bins = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    low, high = ps.rect_bounds(thetas[:, None, :], bins[None, :, :])
    meets = np.all((high > region.low) & (low < region.high), axis=-1)
    return bins, low, high, meets


def _boundary_points(o, ps, kinks, pairs, refine):
    """Opposing point pairs ``(o + y with y_i = -l_i/2, o + y with y_i = +l_i/2)`` for every axis."""
    d = ps.dim
    l = ps.bin_dims
    out = []
    for i in range(d):
        if d == 1:
            lower = o.copy()[None]
        else:
            j = 1 - i
            base = (np.arange(pairs) + 0.5) / pairs * l[j] - l[j] / 2
            # refine near places where a bin edge crosses a kink of the measures
            k = np.asarray(kinks[j], dtype=float)
            edges = np.concatenate([k - o[j] - l[j] / 2, k - o[j] + l[j] / 2])
            edges = edges[(edges > -l[j] / 2) & (edges < l[j] / 2)]
            spacing = l[j] / pairs
            fine = (edges[:, None] + np.linspace(-spacing, spacing, 2 * refine + 1)[None]).reshape(-1)
            ys = np.unique(np.clip(np.concatenate([base, fine]), -l[j] / 2, l[j] / 2))
            lower = np.tile(o, (ys.size, 1))
            lower[:, j] = o[j] + ys
        lower = lower.copy()
        upper = lower.copy()
        lower[:, i] = o[i] - l[i] / 2
        upper[:, i] = o[i] + l[i] / 2
        out.append((i, lower, upper))
    return out


def boundary_mismatch(prior: Measure, posterior: Measure, ps: RegularPartitionSpace, o, pairs: int = 64,
                      refine: int = 4):
    """Largest ``|Q(lower) - Q(upper)|`` over opposing boundary pairs, plus the scale ``max |Q|``."""
    o = np.atleast_1d(np.asarray(o, dtype=float))
    q = ratio_function(prior, posterior, ps)
    kinks = [np.concatenate([prior.breakpoints(j), posterior.breakpoints(j)]) for j in range(ps.dim)]
    worst, where, scale = 0.0, None, 0.0
    for i, lower, upper in _boundary_points(o, ps, kinks, pairs, refine):
        ql, qu = q(lower), q(upper)
        diff = np.abs(ql - qu)
        scale = max(scale, float(np.max(np.abs(ql))), float(np.max(np.abs(qu))))
        k = int(np.argmax(diff))
        if diff[k] > worst or where is None:
            worst, where = float(diff[k]), {"axis": i, "lower": lower[k].tolist(), "upper": upper[k].tolist()}
    return worst, scale, where


def check_pi(prior: Measure, posterior_builder: Measure | Callable, ps: RegularPartitionSpace, o, n_theta: int,
             competitor_region: Rect, seed: int = 0, sampler: str = "mc", boundary_pairs: int = 64,
             boundary_tol: float = BOUNDARY_TOL) -> ConditionReport:
    """Per-shift ratio test over every bin meeting ``competitor_region``.

    The condition has to hold for every shift, so any violating draw fails
    the check.  For continuous posteriors the opposing boundary equalities
    are evaluated too; a mismatch above ``10 * boundary_tol * max|Q|`` fails.
    """
    o = np.atleast_1d(np.asarray(o, dtype=float))
    posterior = _posterior(posterior_builder, prior, o)
    thetas = _thetas(ps, n_theta, seed, sampler)
    bins, low, high, meets = _region_bins(ps, thetas, competitor_region)
    pri = prior.box_prob(low, high)
    post = posterior.box_prob(low, high)
    n_o = ps.select(thetas, o[None])                                     # (T, d)
    is_obs = np.all(bins[None, :, :] == n_o[:, None, :], axis=-1)         # (T, m)
    lo_o, hi_o = ps.rect_bounds(thetas, n_o)
    pri_o = prior.box_prob(lo_o, hi_o)
    if np.any(pri_o <= 0):
        raise DegeneratePaymentError("the observation's bin has zero prior probability")
    ratio_o = posterior.box_prob(lo_o, hi_o) / pri_o
    active = meets & ~is_obs & ((pri > 0) | (post > 0))
    if np.any(active & (pri <= 0)):
        raise DegeneratePaymentError("a competitor bin has posterior mass but zero prior probability")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(active, post / np.where(pri > 0, pri, 1.0), -np.inf)
    best = np.argmax(ratio, axis=1)
    best_val = ratio[np.arange(len(thetas)), best]
    margins = ratio_o - best_val
    t_worst = int(np.argmin(margins))
    worst = float(margins[t_worst])
    violating = float(np.mean(margins <= 0))
    details = {"n_theta": int(len(thetas)), "seed": int(seed), "sampler": sampler,
               "theta_at_worst": thetas[t_worst].tolist()}
    passed = violating == 0.0 and worst > 0
    if posterior.continuous:
        mismatch, scale, where = boundary_mismatch(prior, posterior, ps, o, boundary_pairs)
        limit = 10 * boundary_tol * max(scale, 1.0)
        details.update(boundary_mismatch=mismatch, boundary_limit=limit, boundary_pair=where)
        if mismatch > limit:
            passed = False
            worst = min(worst, limit - mismatch)
    comp = bins[best[t_worst]].tolist() if np.isfinite(best_val[t_worst]) else None
    return ConditionReport("PI", passed, worst, violating, comp, details)


def local_competitors(o, ps: RegularPartitionSpace, per_axis: int = 8, far: tuple = (1.5, 2.0, 3.0)) -> np.ndarray:
    """Grid over ``(o - L, o + L]`` at spacing ``L / per_axis`` (o itself excluded) plus far-field points."""
    o = np.atleast_1d(np.asarray(o, dtype=float))
    steps = np.arange(-per_axis + 1, per_axis + 1) / per_axis
    mesh = np.meshgrid(*([steps] * ps.dim), indexing="ij")
    offs = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    offs = offs[np.any(offs != 0, axis=1)]
    extra = []
    for f in far:
        for i in range(ps.dim):
            for s in (-1.0, 1.0):
                e = np.zeros(ps.dim)
                e[i] = s * f
                extra.append(e)
        if ps.dim == 2:
            extra.extend(np.array([[f, f], [-f, f], [f, -f], [-f, -f]]))
    offs = np.vstack([offs] + ([np.array(extra)] if extra else []))
    return o + offs * ps.bin_dims


def expected_ratio(prior: Measure, posterior: Measure, ps: RegularPartitionSpace, points, panels: int = 64,
                   order: int = 3):
    """Shift-expectation of the bin ratio at each point, by quadrature over the bin centre.

    Under a uniform shift the centre of the bin holding ``x`` is uniform on
    the bin-sized box around ``x``, so the expectation is the average of
    ``Q`` over that box.  The rule is anchored at every place a bin edge
    crosses a breakpoint of either measure.  Returns ``(values, error)``
    where ``error`` compares against half the panels.
    """
    pts = as_points(points, ps.dim).reshape(-1, ps.dim)
    q = ratio_function(prior, posterior, ps)
    kinks = [np.concatenate([prior.breakpoints(j), posterior.breakpoints(j)]) for j in range(ps.dim)]
    l = ps.bin_dims

    def average(x, p):
        rules = []
        for j in range(ps.dim):
            k = np.asarray(kinks[j])
            breaks = np.concatenate([k - x[j] - l[j] / 2, k - x[j] + l[j] / 2])
            rules.append(_composite_nodes(-l[j] / 2, l[j] / 2, breaks, p, order))
        if ps.dim == 1:
            y, w = rules[0]
            return float(w @ q(x + y[:, None])) / l[0]
        (y0, w0), (y1, w1) = rules
        g0, g1 = np.meshgrid(y0, y1, indexing="ij")
        vals = q(x + np.stack([g0.reshape(-1), g1.reshape(-1)], axis=-1)).reshape(g0.shape)
        return float(w0 @ vals @ w1) / ps.volume

    fine = np.array([average(x, panels) for x in pts])
    coarse = np.array([average(x, max(1, panels // 2)) for x in pts])
    return fine, np.abs(fine - coarse) / (2 ** (2 * order) - 1)


def check_pe(prior: Measure, posterior: Measure, ps: RegularPartitionSpace, o, competitors, n_theta: int,
             seed: int = 0, sampler: str = "mc", panels: int = 32) -> ConditionReport:
    """Does the observation beat every competitor in shift-expected ratio?

    ``sampler`` picks how the shift expectation is taken: ``"mc"`` (seeded
    draws; paired differences, 3 standard errors), ``"grid"`` (midpoint
    shift grid; the error bar is the gap to a coarser grid) or ``"quad"``
    (:func:`expected_ratio`; the error bar is the quadrature estimate).
    """
    o = np.atleast_1d(np.asarray(o, dtype=float))
    comps = as_points(competitors, ps.dim).reshape(-1, ps.dim)
    if comps.shape[0] == 0:
        raise ValueError("competitors must be non-empty")
    if np.any(np.all(comps == o, axis=1)):
        raise ValueError("competitors must exclude the observation")
    details: dict = {"sampler": sampler, "n_competitors": int(comps.shape[0])}
    if sampler == "quad":
        vals, err = expected_ratio(prior, posterior, ps, np.vstack([o[None], comps]), panels)
        diff = vals[0] - vals[1:]
        se = err[0] + err[1:]
        details["panels"] = int(panels)
    elif sampler in ("mc", "grid"):
        thetas = _thetas(ps, n_theta, seed, sampler)
        table, _ = payment_table(PtsConfig(), prior, ps, np.vstack([o[None], comps]), thetas, peer_measure=posterior)
        d = table[0][None, :] - table[1:]
        diff = d.mean(axis=1)
        if sampler == "mc":
            se = d.std(axis=1, ddof=1) / np.sqrt(d.shape[1]) if d.shape[1] > 1 else np.zeros(len(diff))
        else:
            coarse_n = max(1, len(thetas) // 2 ** ps.dim)
            ct, _ = payment_table(PtsConfig(), prior, ps, np.vstack([o[None], comps]), ps.theta_grid(coarse_n),
                                  peer_measure=posterior)
            se = np.abs(diff - (ct[0][None, :] - ct[1:]).mean(axis=1)) / 3
        details.update(n_theta=int(len(thetas)), seed=int(seed))
    else:
        raise ValueError("sampler must be 'mc', 'grid' or 'quad'")
    margins = diff - 3 * se
    j = int(np.argmin(margins))
    details["error_at_worst"] = float(se[j])
    details["mean_gap_at_worst"] = float(diff[j])
    if posterior.continuous:
        kinks = [np.concatenate([prior.breakpoints(i), posterior.breakpoints(i)]) for i in range(ps.dim)]
        S = face_integrals(ratio_function(prior, posterior, ps), o, ps, kinks)
        F = S[:, 1] - S[:, 0]
        details.update(face_residuals=F.tolist(),
                       relative_face_residual=float(np.max(np.abs(F)) / np.max(np.abs(S))),
                       expected_gradient=(F / ps.volume).tolist())
    worst = float(margins[j])
    return ConditionReport("PE", worst > 0, worst, None, comps[j].tolist(), details)
