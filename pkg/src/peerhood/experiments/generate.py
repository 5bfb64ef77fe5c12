"""Random truth/public distribution pairs sharing one support."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .._rng import generator
from ..measures import Empirical, GaussianMixture, Measure
from .config import DistributionSpec

log = logging.getLogger(__name__)

MIN_SEPARATION = 1e-9
MAX_REDRAWS = 100


@dataclass
class DistributionPair:
    truth: Measure
    public: Measure
    values: np.ndarray
    redraws: int = 0
    variance: float | None = None

    def __iter__(self):
        # allows ``truth, public = gen_distributions(...)``
        return iter((self.truth, self.public))


def draw_values(n: int, dim: int, seed: int):
    """``n`` distinct uniform points in ``[0, 1)^dim``; coincident draws are redrawn."""
    for attempt in range(MAX_REDRAWS):
        vals = generator(seed, "values", attempt).random((n, dim))
        if pdist(vals).min() > MIN_SEPARATION:
            if attempt:
                log.info("redrew support values %d time(s) for seed %d", attempt, seed)
            return vals, attempt
    raise RuntimeError(f"could not draw {n} separated values for seed {seed}")


def gen_distributions(spec: DistributionSpec, dim: int, seed: int) -> DistributionPair:
    """Truth and public distributions on the same support with independent random weights.

    For the ``gmm`` kind every component shares the variance
    ``variance_factor * min pairwise distance`` in every coordinate.
    """
    values, redraws = draw_values(spec.n_values, dim, seed)
    w_truth = generator(seed, "truth-weights").random(spec.n_values)
    w_public = generator(seed, "public-weights").random(spec.n_values)
    w_truth /= w_truth.sum()
    w_public /= w_public.sum()
    if spec.kind == "empirical":
        return DistributionPair(Empirical(values, w_truth), Empirical(values, w_public), values, redraws)
    var = spec.variance_factor * float(pdist(values).min())
    return DistributionPair(GaussianMixture(values, var, w_truth), GaussianMixture(values, var, w_public),
                            values, redraws, var)
