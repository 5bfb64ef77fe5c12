"""Experiment runners.  Each is a pure function of its (resolved) configuration."""

from __future__ import annotations

import datetime as _dt
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.stats import spearmanr

from .._rng import generator
from ..conditions import check_pe, check_pi, local_competitors
from ..errors import DegeneratePaymentError
from ..measures import BoxUniform, Measure, Mixture, Rect
from ..mechanism import FLOOR, PtsConfig, payment_table
from ..partitions import RegularPartitionSpace
from ..updates import (PyramidBuilder, UpdateSequenceState, additive_update, convergence_report, dkw_band,
                       empirical_kernel, empirical_update, sequence_update, solve_pe_apex)
from .config import ConfigError, ExperimentConfig
from .generate import gen_distributions
from .records import ResultRecord, plain


def _record(cfg: ExperimentConfig, columns, rows, diagnostics) -> ResultRecord:
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat() if cfg.timestamps else None
    return ResultRecord(cfg.experiment, plain(cfg.to_dict(runtime=False)), cfg.hash(), list(columns),
                        plain(rows), plain(diagnostics), timestamp=stamp)


def _expect(cfg: ExperimentConfig, *kinds) -> ExperimentConfig:
    cfg = cfg.resolved()
    if cfg.experiment not in kinds:
        raise ConfigError(f"this runner handles {kinds}, not {cfg.experiment!r}")
    return cfg


def _map_blocks(fn, items: np.ndarray, block: int, workers: int) -> np.ndarray:
    """Apply ``fn`` to fixed-size blocks; block boundaries never depend on ``workers``."""
    chunks = [items[i:i + block] for i in range(0, len(items), block)]
    if workers == 1:
        parts = [fn(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(fn, chunks))
    return np.concatenate(parts, axis=0)


def _map_items(fn, items, workers: int) -> list:
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _space(cfg) -> RegularPartitionSpace:
    return RegularPartitionSpace(cfg.partition.bin_dims)


def _observation(cfg, truth: Measure) -> np.ndarray:
    return truth.sample(1, generator(cfg.seed, "observation"))[0]


def _region(cfg, ps) -> Rect:
    """Box holding every report and competitor the runners generate."""
    pad = cfg.grids.perturb_range + 2 * ps.bin_dims
    return Rect(np.zeros(cfg.dim) - pad, np.ones(cfg.dim) + pad)


def build_posterior(cfg, prior: Measure, o, ps):
    """Agent posterior after observing ``o``; returns ``(posterior, diagnostics)``."""
    alpha = cfg.update.alpha
    if cfg.update.kind == "empirical":
        return empirical_update(prior, o, alpha), {"kernel": "point_mass"}
    delta = cfg.update.delta_fraction * ps.bin_dims
    kernel, info = solve_pe_apex(prior, o, delta, ps, alpha, full_output=True)
    diag = {"kernel": "pyramid", "delta": delta, "base_center": kernel.center, "solver": info.to_dict()}
    return additive_update(prior, kernel, alpha), diag


def perturbation_grid(cfg) -> np.ndarray:
    """Offsets from ``-range`` to ``range`` at the configured step, per axis."""
    n = int(round(cfg.grids.perturb_range / cfg.grids.perturb_step))
    axis = np.arange(-n, n + 1) * cfg.grids.perturb_step
    mesh = np.meshgrid(*([axis] * cfg.dim), indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def _coords(prefix, v):
    return {f"{prefix}{i}": float(x) for i, x in enumerate(np.atleast_1d(v))}


def _argmax_offset(offsets, means, step):
    """Offset of the best grid point (nearest to zero among exact ties) in grid steps."""
    best = np.flatnonzero(means == means.max())
    norms = np.max(np.abs(offsets[best]), axis=1)
    k = best[int(np.argmin(norms))]
    return offsets[k], int(round(np.max(np.abs(offsets[k])) / step))


def run_perturbation(cfg: ExperimentConfig) -> ResultRecord:
    """Expected payment for reports ``o + p`` across a perturbation grid.

    Agent side: peers follow the agent's posterior (exact bin masses).
    Center side: the average over ``peers`` truthful draws from the truth.
    The same shifts are used for every grid point.
    """
    cfg = _expect(cfg, "perturbation_agent", "perturbation_center")
    ps = _space(cfg)
    pair = gen_distributions(cfg.distribution, cfg.dim, cfg.seed)
    truth, public = pair.truth, pair.public
    o = _observation(cfg, truth)
    thetas = ps.sample_theta(cfg.grids.theta_samples, generator(cfg.seed, "theta"))
    offsets = perturbation_grid(cfg)
    reports = o + offsets
    pts = PtsConfig(cfg.c)
    region = _region(cfg, ps)
    diag = {"observation": o, "values": pair.values, "truth_weights": truth.weights,
            "public_weights": public.weights, "value_redraws": pair.redraws}
    if pair.variance is not None:
        diag["gmm_variance"] = pair.variance
    metas: list = []
    if cfg.experiment == "perturbation_agent":
        posterior, post_diag = build_posterior(cfg, public, o, ps)
        diag.update(post_diag)

        def fn(block):
            vals, meta = payment_table(pts, public, ps, block, thetas, peer_measure=posterior,
                                       zero_bin=cfg.zero_bin, region=region)
            metas.append(meta)
            return vals
        n_peers = None
    else:
        peers = truth.sample(cfg.grids.peers, generator(cfg.seed, "peers"))

        def fn(block):
            vals, meta = payment_table(pts, public, ps, block, thetas, peers=peers,
                                       zero_bin=cfg.zero_bin, region=region)
            metas.append(meta)
            return vals
        n_peers = cfg.grids.peers
    table = _map_blocks(fn, reports, cfg.grids.block, cfg.workers)
    means = table.mean(axis=1)
    stds = table.std(axis=1, ddof=1) if table.shape[1] > 1 else np.zeros(len(means))
    rows = []
    for off, rep, m, s in zip(offsets, reports, means, stds):
        row = {**_coords("p", off), **_coords("r", rep), "mean": float(m), "std_dev": float(s),
               "n_theta": int(table.shape[1]), "seed": int(cfg.seed)}
        if n_peers is not None:
            row["n_peers"] = int(n_peers)
        rows.append(row)
    best, steps = _argmax_offset(offsets, means, cfg.grids.perturb_step)
    diag.update(argmax_offset=best, argmax_steps=steps)
    if any(m.get("floored_bins") for m in metas):
        diag["assumption_override"] = "R bin probability floored at 1e-12"
    columns = [f"p{i}" for i in range(cfg.dim)] + [f"r{i}" for i in range(cfg.dim)] + \
        ["mean", "std_dev", "n_theta", "seed"] + (["n_peers"] if n_peers is not None else [])
    return _record(cfg, columns, rows, diag)


def _sweep_point(cfg, public, size, u, reports, peers):
    side = size ** (1.0 / cfg.dim)
    ps = RegularPartitionSpace([side] * cfg.dim)
    thetas = np.minimum(u * side, np.nextafter(side, 0))
    n_r = ps.select(thetas, reports)
    n_p = ps.select(thetas[:, None, :], peers)
    matches = np.all(n_p == n_r[:, None, :], axis=-1).sum(axis=1)
    low, high = ps.rect_bounds(thetas, n_r)
    r_prob = public.box_prob(low, high)
    bad = (matches > 0) & (r_prob <= 0)
    if bad.any():
        if cfg.zero_bin != "floor":
            raise DegeneratePaymentError(f"bin size {size}: matched reports in a zero-probability bin")
        r_prob = np.where(bad, FLOOR, r_prob)
    pay = np.where(matches > 0, matches / peers.shape[1] * cfg.c / np.where(r_prob > 0, r_prob, 1.0), 0.0)
    var = float(np.var(pay, ddof=1)) if pay.size > 1 else 0.0
    return {"bin_size": float(size), "side": float(side), "mean": float(pay.mean()), "variance": var,
            "std_dev": float(np.sqrt(var)), "std_error": float(np.sqrt(var / pay.size)),
            "n_theta": int(pay.size), "n_peers": int(peers.shape[1]), "seed": int(cfg.seed)}


def run_bin_size_sweep(cfg: ExperimentConfig) -> ResultRecord:
    """Center-side payment for truthful reporting across bin sizes.

    Each shift draw pairs one report and ``peers`` peer reports, all from the
    truth; shift fractions, reports and peers are shared by every bin size.
    """
    cfg = _expect(cfg, "bin_size_sweep")
    if cfg.zero_bin == "contract":
        raise ConfigError("the bin-size sweep supports the 'error' and 'floor' policies only")
    pair = gen_distributions(cfg.distribution, cfg.dim, cfg.seed)
    truth, public = pair.truth, pair.public
    T, P = cfg.grids.theta_samples, cfg.grids.peers
    u = generator(cfg.seed, "theta").random((T, cfg.dim))
    reports = truth.sample(T, generator(cfg.seed, "reports"))
    peers = truth.sample(T * P, generator(cfg.seed, "peers")).reshape(T, P, cfg.dim)
    rows = _map_items(lambda s: _sweep_point(cfg, public, s, u, reports, peers), cfg.partition.sweep, cfg.workers)
    means = np.array([r["mean"] for r in rows])
    ses = np.array([r["std_error"] for r in rows])
    var = np.array([r["variance"] for r in rows])
    sizes = np.array([r["bin_size"] for r in rows])
    grand = float(means.mean())
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = np.where(ses > 0, np.abs(means - grand) / ses, np.where(means == grand, 0.0, np.inf))
    rho = float(spearmanr(var, sizes)[0]) if len(rows) > 1 else float("nan")
    diag = {"grand_mean": grand, "max_deviation_in_se": float(dev.max()), "spearman_variance_vs_size": rho,
            "values": pair.values, "truth_weights": truth.weights, "public_weights": public.weights}
    columns = ["bin_size", "side", "mean", "variance", "std_dev", "std_error", "n_theta", "n_peers", "seed"]
    return _record(cfg, columns, rows, diag)


def eval_grid(cfg, values=None) -> np.ndarray:
    """Regular KS grid; support coordinates are added so atomic CDF jumps are hit exactly."""
    axis = np.linspace(-0.5, 1.5, cfg.grids.eval_points)
    axes = [axis] * cfg.dim
    if values is not None:
        axes = [np.union1d(axis, values[:, i]) for i in range(cfg.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def run_convergence(cfg: ExperimentConfig) -> ResultRecord:
    """KS distance to the truth along an additive update sequence started at the public prior."""
    cfg = _expect(cfg, "convergence")
    ps = _space(cfg)
    pair = gen_distributions(cfg.distribution, cfg.dim, cfg.seed)
    truth, public = pair.truth, pair.public
    checkpoints = sorted(set(cfg.grids.checkpoints))
    n_max = checkpoints[-1]
    obs = truth.sample(n_max, generator(cfg.seed, "observations")) if n_max else np.empty((0, cfg.dim))
    if cfg.update.kind == "empirical":
        builder = empirical_kernel
    else:
        builder = PyramidBuilder(tuple(cfg.update.delta_fraction * ps.bin_dims), cfg.update.kernel_mode, ps)
    state = UpdateSequenceState(cfg.update.k, public)
    grid = eval_grid(cfg, pair.values)
    rows = []
    for n in checkpoints:
        while state.n < n:
            state = sequence_update(state, obs[state.n], builder)
        rep = convergence_report(state, truth, grid)
        band = dkw_band(n) if n else float("inf")
        row = {"n": n, "ks_distance": rep.ks_distance, "dkw_band": band,
               "bound": band + cfg.update.k / (cfg.update.k + n), "seed": int(cfg.seed)}
        row.update({f"conc_{e:g}": float(c) for e, c in zip(rep.eps, rep.concentration)})
        rows.append(row)
    columns = list(rows[0].keys())
    return _record(cfg, columns, rows, {"kernel": cfg.update.kind, "eval_points": int(grid.shape[0])})


def _condition_instance(cfg):
    ps = _space(cfg)
    pair = gen_distributions(cfg.distribution, cfg.dim, cfg.seed)
    o = _observation(cfg, pair.truth)
    posterior, diag = build_posterior(cfg, pair.public, o, ps)
    diag.update(observation=o, values=pair.values)
    return ps, pair, o, posterior, diag


def _report_record(cfg, report, diag):
    row = {"condition": report.condition, "passed": bool(report.passed), "worst_margin": report.worst_margin,
           "violating_theta_fraction": report.violating_theta_fraction,
           "competitor_at_worst": report.competitor_at_worst, "seed": int(cfg.seed)}
    diag = {**diag, "report": report.details}
    return _record(cfg, list(row.keys()), [row], diag)


def run_check_pi(cfg: ExperimentConfig) -> ResultRecord:
    cfg = _expect(cfg, "check_pi")
    ps, pair, o, posterior, diag = _condition_instance(cfg)
    sampler = "grid" if cfg.grids.sampler == "grid" else "mc"
    report = check_pi(pair.public, posterior, ps, o, cfg.grids.theta_samples, _region(cfg, ps),
                      cfg.seed, sampler)
    return _report_record(cfg, report, diag)


def run_check_pe(cfg: ExperimentConfig) -> ResultRecord:
    cfg = _expect(cfg, "check_pe")
    ps, pair, o, posterior, diag = _condition_instance(cfg)
    comps = local_competitors(o, ps, cfg.grids.competitors_per_axis)
    report = check_pe(pair.public, posterior, ps, o, comps, cfg.grids.theta_samples, cfg.seed, cfg.grids.sampler)
    return _report_record(cfg, report, diag)


def four_corner_prior(o, bin_dims, densities=(2.0, 1.0, 1.0, 4.0), extent: float = 1.5) -> Mixture:
    """Piecewise-uniform prior on ``o +- extent * L`` with one density per quadrant.

    ``densities`` are ordered (lower-left, lower-right, upper-left, upper-right).
    """
    o = np.asarray(o, dtype=float)
    L = np.asarray(bin_dims, dtype=float)
    if o.size != 2:
        raise ConfigError("the four-corner prior is two-dimensional")
    lo, hi = o - extent * L, o + extent * L
    terms = []
    for (ix, iy), dens in zip([(0, 0), (1, 0), (0, 1), (1, 1)], densities):
        a = np.where([ix, iy], o, lo)
        b = np.where([ix, iy], hi, o)
        terms.append((dens * float(np.prod(b - a)), BoxUniform(a, b)))
    total = sum(c for c, _ in terms)
    coefs = [c / total for c, _ in terms]
    coefs[-1] = 1.0 - sum(coefs[:-1])
    return Mixture(zip(coefs, [m for _, m in terms]))


def run_pi_demo(cfg: ExperimentConfig) -> ResultRecord:
    """Four-corner prior: the PE pyramid passes PE but breaks a PI boundary equality."""
    cfg = _expect(cfg, "pi_impossibility_demo")
    if cfg.dim != 2:
        raise ConfigError("the PI impossibility demonstration needs dim = 2")
    ps = _space(cfg)
    o = np.array([0.5, 0.5])
    prior = four_corner_prior(o, ps.bin_dims)
    delta = cfg.update.delta_fraction * ps.bin_dims
    kernel, info = solve_pe_apex(prior, o, delta, ps, cfg.update.alpha, full_output=True)
    posterior = additive_update(prior, kernel, cfg.update.alpha)
    region = Rect(o - 1.5 * ps.bin_dims, o + 1.5 * ps.bin_dims)
    sampler = "grid" if cfg.grids.sampler == "grid" else "mc"
    pi = check_pi(prior, posterior, ps, o, cfg.grids.theta_samples, region, cfg.seed, sampler)
    comps = local_competitors(o, ps, cfg.grids.competitors_per_axis, far=())
    pe = check_pe(prior, posterior, ps, o, comps, cfg.grids.theta_samples, cfg.seed, cfg.grids.sampler)
    rows = [
        {"condition": r.condition, "passed": bool(r.passed), "worst_margin": r.worst_margin,
         "violating_theta_fraction": r.violating_theta_fraction, "seed": int(cfg.seed)}
        for r in (pi, pe)
    ]
    diag = {"observation": o, "delta": delta, "base_center": kernel.center, "solver": info.to_dict(),
            "boundary_mismatch": pi.details.get("boundary_mismatch"),
            "boundary_limit": pi.details.get("boundary_limit"), "pi": pi.details, "pe": pe.details}
    return _record(cfg, list(rows[0].keys()), rows, diag)


RUNNERS = {
    "perturbation_agent": run_perturbation,
    "perturbation_center": run_perturbation,
    "bin_size_sweep": run_bin_size_sweep,
    "convergence": run_convergence,
    "check_pi": run_check_pi,
    "check_pe": run_check_pe,
    "pi_impossibility_demo": run_pi_demo,
}


def run(cfg: ExperimentConfig) -> ResultRecord:
    return RUNNERS[cfg.experiment](cfg)
