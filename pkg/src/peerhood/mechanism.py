"""Peer Truth Serum payments and their neighbourhood extension.

The discrete payment is ``f(rr) + s_R(r) * 1[r == rr]`` with the PTS score
``s_R(r) = c / R(r)``.  For continuous reports a shift ``theta`` turns both
reports into bin indices and the public prior into bin probabilities; the
neighbourhood payment averages that over ``theta`` drawn uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._rng import generator
from .errors import DegeneratePaymentError
from .measures import Measure, Rect, as_points
from .partitions import RegularPartitionSpace, contract

FLOOR = 1e-12
ZERO_BIN_POLICIES = ("error", "floor", "contract")


@dataclass(frozen=True)
class PtsConfig:
    """Peer Truth Serum scoring.

    ``f_offset`` is either a constant or a function of the peer report; it
    defaults to zero.  Any object with ``score`` and ``offset`` methods can
    stand in for this class where a scoring rule is expected.
    """

    c: float = 1.0
    f_offset: Callable | float | None = None

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")

    def score(self, prob):
        return self.c / np.asarray(prob, dtype=float)

    def offset(self, rr) -> np.ndarray:
        """Offset for each peer report in ``rr`` (leading axes of an (…, d) array)."""
        rr = np.asarray(rr, dtype=float)
        shape = rr.shape[:-1] if rr.ndim else ()
        if self.f_offset is None:
            return np.zeros(shape)
        if callable(self.f_offset):
            return np.asarray(self.f_offset(rr), dtype=float).reshape(shape)
        return np.full(shape, float(self.f_offset))

    @property
    def has_offset(self) -> bool:
        return self.f_offset is not None and (callable(self.f_offset) or float(self.f_offset) != 0.0)


@dataclass
class PaymentEstimate:
    mean: float
    std_dev: float
    n_theta: int
    seed: int | None
    metadata: dict = field(default_factory=dict)

    @property
    def std_error(self) -> float:
        return self.std_dev / np.sqrt(self.n_theta)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_dev": self.std_dev, "n_theta": self.n_theta,
                "seed": self.seed, **({"metadata": self.metadata} if self.metadata else {})}


def pts_pay(cfg: PtsConfig, R_cat, r: int, rr: int) -> float:
    """Discrete PTS payment for categorical reports."""
    R_cat = np.asarray(R_cat, dtype=float)
    pay = float(cfg.offset(np.array([float(rr)])))
    if r != rr:
        return pay
    if R_cat[r] <= 0:
        raise DegeneratePaymentError(f"reports matched on category {r} with R = 0")
    return pay + float(cfg.score(R_cat[r]))


def _std(values):
    return float(np.std(values, ddof=1)) if values.size > 1 else 0.0


def _guard(r_prob, hit, zero_bin, meta):
    """Apply the zero-bin policy where a positive-mass event meets a zero-R bin."""
    bad = hit & (r_prob <= 0)
    if bad.any():
        if zero_bin == "floor":
            meta["floored_bins"] = meta.get("floored_bins", 0) + int(bad.sum())
            meta["assumption_override"] = "R bin probability floored at 1e-12"
            return np.where(bad, FLOOR, r_prob)
        raise DegeneratePaymentError(
            f"{int(bad.sum())} report(s) matched inside a zero-probability bin of R; "
            "the partition space is not bin-supported over R")
    return np.where(r_prob > 0, r_prob, 1.0)


def payment_table(cfg: PtsConfig, R: Measure, ps: RegularPartitionSpace, reports, thetas,
                  peer_measure: Measure | None = None, peers=None,
                  zero_bin: str = "error", region: Rect | None = None):
    """Per-shift expected payment for each report.

    Exactly one of ``peer_measure`` (exact bin masses) or ``peers`` (an
    ``(n, d)`` array of peer reports, averaged over) must be given.  Returns
    ``(values, meta)`` with ``values`` shaped ``(n_reports, n_theta)``.
    """
    if zero_bin not in ZERO_BIN_POLICIES:
        raise ValueError(f"zero_bin must be one of {ZERO_BIN_POLICIES}")
    if (peer_measure is None) == (peers is None):
        raise ValueError("give exactly one of peer_measure or peers")
    reports = as_points(reports, ps.dim).reshape(-1, ps.dim)
    thetas = as_points(thetas, ps.dim).reshape(-1, ps.dim)
    meta: dict = {}
    if zero_bin == "contract":
        if region is None:
            raise ValueError("the contract policy needs a bounding region")
        return _payment_table_contracted(cfg, R, ps, reports, thetas, peer_measure, peers, region, meta)

    n_rep = ps.select(thetas[None, :, :], reports[:, None, :])          # (P, T, d)
    low, high = ps.rect_bounds(thetas[None, :, :], n_rep)
    r_prob = R.box_prob(low, high)                                        # (P, T)

    if peer_measure is not None:
        mass = peer_measure.box_prob(low, high)
        r_safe = _guard(r_prob, mass > 0, zero_bin, meta)
        values = np.where(mass > 0, mass * cfg.score(r_safe), 0.0)
        if cfg.has_offset:
            draws = peer_measure.sample(1000, 0)
            values = values + cfg.offset(draws).mean()
        return values, meta

    peers = as_points(peers, ps.dim).reshape(-1, ps.dim)
    n_peer = ps.select(thetas[None, :, :], peers[:, None, :])            # (Q, T, d)
    counts = np.empty(r_prob.shape)
    key_rep = _encode(n_rep)
    key_peer = _encode(n_peer)
    for t in range(thetas.shape[0]):
        sorted_keys = np.sort(key_peer[:, t])
        left = np.searchsorted(sorted_keys, key_rep[:, t], side="left")
        right = np.searchsorted(sorted_keys, key_rep[:, t], side="right")
        counts[:, t] = right - left
    frac = counts / peers.shape[0]
    r_safe = _guard(r_prob, counts > 0, zero_bin, meta)
    score = np.where(counts > 0, cfg.score(r_safe), 0.0)
    values = frac * score + cfg.offset(peers).mean()
    # per-shift standard error of the peer average (Bernoulli match indicator)
    if peers.shape[0] > 1:
        sq_err = score**2 * frac * (1 - frac) / (peers.shape[0] - 1)
        meta["peer_std_error"] = float(np.sqrt(sq_err.mean()))
    return values, meta


def _encode(n):
    """Pack integer bin vectors into one int64 key each."""
    n = np.asarray(n, dtype=np.int64)
    if n.shape[-1] == 1:
        return n[..., 0]
    return n[..., 0] * np.int64(1 << 31) + n[..., 1]


def _payment_table_contracted(cfg, R, ps, reports, thetas, peer_measure, peers, region, meta):
    values = np.zeros((reports.shape[0], thetas.shape[0]))
    meta["contracted"] = True
    if peers is not None:
        peers = as_points(peers, ps.dim).reshape(-1, ps.dim)
    for t, theta in enumerate(thetas):
        part = contract(ps, theta, R, region)
        rep_bins = part.map_many(ps.select(theta, reports))
        if peers is not None:
            peer_keys = [tuple(b) for b in part.map_many(ps.select(theta, peers))]
        for p, nb in enumerate(rep_bins):
            key = tuple(int(v) for v in nb)
            r_p = part.probabilities.get(key)
            if r_p is None:
                lo, hi = ps.rect_bounds(theta, nb)
                r_p = float(R.box_prob(lo, hi))
            members = np.array(part.members(key)).reshape(-1, ps.dim)
            if peer_measure is not None:
                lo, hi = ps.rect_bounds(theta, members)
                mass = float(peer_measure.box_prob(lo, hi).sum())
            else:
                mass = sum(k == key for k in peer_keys) / len(peer_keys)
            if mass > 0:
                if r_p <= 0:
                    raise DegeneratePaymentError("zero-probability bin survived contraction")
                values[p, t] = mass * float(cfg.score(r_p))
    if peers is not None:
        values += cfg.offset(peers).mean()
    return values, meta


def bin_extended_pay(cfg: PtsConfig, R: Measure, ps: RegularPartitionSpace, theta, r, rr,
                     contraction=None, zero_bin: str = "error") -> float:
    """Payment for one shift: PTS applied to the bins holding ``r`` and ``rr``."""
    theta = ps.check_theta(theta)
    n_r = ps.select(theta, r).reshape(-1)
    n_rr = ps.select(theta, rr).reshape(-1)
    offset = float(cfg.offset(as_points(rr, ps.dim)))
    if contraction is not None:
        n_r = np.array(contraction.map(n_r))
        n_rr = np.array(contraction.map(n_rr))
    if not np.array_equal(n_r, n_rr):
        return offset
    lo, hi = ps.rect_bounds(theta, n_r)
    r_p = float(R.box_prob(lo, hi).reshape(-1)[0])
    if r_p <= 0:
        if zero_bin == "floor":
            r_p = FLOOR
        else:
            raise DegeneratePaymentError("reports matched inside a zero-probability bin of R")
    return offset + float(cfg.score(r_p))


def _estimate(values, n_theta, seed, meta) -> PaymentEstimate:
    values = np.asarray(values, dtype=float).reshape(-1)
    return PaymentEstimate(float(values.mean()), _std(values), int(n_theta), seed, meta)


def _thetas(ps, n_theta, seed, sampler):
    if sampler == "mc":
        return ps.sample_theta(n_theta, seed)
    if sampler == "grid":
        return ps.theta_grid(n_theta)
    raise ValueError("sampler must be 'mc' or 'grid'")


def ptne_pay(cfg: PtsConfig, R: Measure, ps: RegularPartitionSpace, r, rr, n_theta: int, seed: int = 0,
             zero_bin: str = "error", region: Rect | None = None, sampler: str = "mc") -> PaymentEstimate:
    """Monte Carlo estimate of the neighbourhood payment for reports ``r``, ``rr``."""
    if n_theta < 1:
        raise ValueError("n_theta must be >= 1")
    thetas = _thetas(ps, n_theta, seed, sampler)
    values, meta = payment_table(cfg, R, ps, as_points(r, ps.dim).reshape(1, -1), thetas,
                                 peers=as_points(rr, ps.dim).reshape(1, -1),
                                 zero_bin=zero_bin, region=region)
    meta.pop("peer_std_error", None)
    return _estimate(values[0], len(thetas), seed, meta)


def expected_pay_under(cfg: PtsConfig, R: Measure, ps: RegularPartitionSpace, report, peer_measure: Measure,
                       n_theta: int, n_peers: int = 200, seed: int = 0, exact: bool = True,
                       zero_bin: str = "error", region: Rect | None = None,
                       sampler: str = "mc") -> PaymentEstimate:
    """Expected payment for ``report`` when peers report according to ``peer_measure``.

    With ``exact`` the inner expectation over peers is the bin mass of
    ``peer_measure``; otherwise ``n_peers`` seeded draws are averaged.  The
    reported standard deviation is with respect to the shift only.
    """
    if n_theta < 1 or n_peers < 1:
        raise ValueError("counts must be >= 1")
    thetas = _thetas(ps, n_theta, seed, sampler)
    if exact:
        values, meta = payment_table(cfg, R, ps, report, thetas, peer_measure=peer_measure,
                                     zero_bin=zero_bin, region=region)
    else:
        peers = peer_measure.sample(n_peers, generator(seed, "peers"))
        values, meta = payment_table(cfg, R, ps, report, thetas, peers=peers,
                                     zero_bin=zero_bin, region=region)
        meta["n_peers"] = int(n_peers)
    return _estimate(values[0], len(thetas), seed, meta)
