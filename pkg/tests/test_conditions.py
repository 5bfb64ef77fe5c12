import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from peerhood.conditions import (boundary_mismatch, check_natural, check_pe, check_pi, expected_ratio,
                                 local_competitors)
from peerhood.errors import DegeneratePaymentError
from peerhood.experiments.runners import four_corner_prior
from peerhood.measures import BoxUniform, Empirical, GaussianMixture, Rect, mix
from peerhood.mechanism import PtsConfig, expected_pay_under
from peerhood.partitions import RegularPartitionSpace
from peerhood.updates import PyramidKernel, empirical_update, solve_pe_apex

P1 = RegularPartitionSpace([0.2])
P2 = RegularPartitionSpace([0.2 ** 0.5, 0.2 ** 0.5])
UNIT = RegularPartitionSpace([1.0])


def two_atoms(weights):
    return Empirical([[0.0], [1.0]], weights)


# ---------------------------------------------------------------- natural

def test_natural_passes_when_observation_bin_gains():
    rep = check_natural(two_atoms([0.5, 0.5]), two_atoms([0.6, 0.4]), UNIT, 0.5, [0.0], [[1]])
    assert rep.passed
    assert rep.worst_margin == pytest.approx(1.2 - 0.8)


def test_natural_fails_when_competitor_gains():
    rep = check_natural(two_atoms([0.5, 0.5]), two_atoms([0.4, 0.6]), UNIT, 0.5, [0.0], [[1]])
    assert not rep.passed
    assert rep.worst_margin == pytest.approx(-0.4)
    assert rep.competitor_at_worst == [1]


def test_natural_fails_for_unchanged_posterior():
    prior = two_atoms([0.3, 0.7])
    rep = check_natural(prior, prior, UNIT, 0.5, [0.0], [[1]])
    assert not rep.passed and rep.worst_margin == pytest.approx(0.0, abs=1e-15)


def test_natural_zero_prior_bin_raises():
    with pytest.raises(DegeneratePaymentError):
        check_natural(two_atoms([0.5, 0.5]), two_atoms([0.5, 0.5]), UNIT, 0.5, [0.0], [[5]])


def test_natural_ignores_observation_bin_in_competitors():
    rep = check_natural(two_atoms([0.5, 0.5]), two_atoms([0.6, 0.4]), UNIT, 0.5, [0.0], [[0]])
    assert rep.passed and rep.worst_margin == np.inf


# ---------------------------------------------------------------- PI

def test_empirical_update_satisfies_pi():
    prior = GaussianMixture([[0.2], [0.6]], 0.01, [0.4, 0.6])
    o = [0.45]
    rep = check_pi(prior, lambda p, x: empirical_update(p, x, 0.5), P1, o, 500, Rect([-1.0], [2.0]), seed=1)
    assert rep.passed and rep.worst_margin > 0
    assert rep.violating_theta_fraction == 0.0


def test_unchanged_posterior_fails_pi():
    prior = GaussianMixture([[0.2], [0.6]], 0.01)
    rep = check_pi(prior, prior, P1, [0.45], 200, Rect([-1.0], [2.0]))
    assert not rep.passed
    assert rep.violating_theta_fraction == 1.0


def test_symmetric_pyramid_on_uniform_prior_has_matching_boundaries():
    prior = BoxUniform([-3.0, -3.0], [4.0, 4.0])
    o = np.array([0.4, 0.5])
    post = mix(prior, 0.5, PyramidKernel(o, P2.bin_dims / 4, o), 0.5)
    worst, scale, _ = boundary_mismatch(prior, post, P2, o)
    assert worst < 1e-12 * scale


def test_one_dimensional_pe_pyramid_satisfies_pi():
    prior = GaussianMixture([[0.2], [0.7]], 0.02, [0.6, 0.4])
    o = [0.4]
    k = solve_pe_apex(prior, o, 0.01, P1)
    post = mix(prior, 0.5, k, 0.5)
    rep = check_pi(prior, post, P1, o, 400, Rect([-1.0], [2.0]))
    assert rep.details["boundary_mismatch"] < rep.details["boundary_limit"]
    assert rep.passed


@pytest.fixture(scope="module")
def four_corner():
    o = np.array([0.5, 0.5])
    prior = four_corner_prior(o, P2.bin_dims)
    k = solve_pe_apex(prior, o, P2.bin_dims / 4, P2, alpha=0.5)
    return prior, o, mix(prior, 0.5, k, 0.5)


def test_four_corner_prior_weights():
    prior = four_corner_prior([0.5, 0.5], P2.bin_dims)
    L = P2.bin_dims
    quadrant = float(prior.box_prob([0.5, 0.5], [0.5 + 1.5 * L[0], 0.5 + 1.5 * L[1]]))
    assert quadrant == pytest.approx(4 / 8)


def test_four_corner_pe_posterior_breaks_pi_boundary(four_corner):
    prior, o, post = four_corner
    rep = check_pi(prior, post, P2, o, 200, Rect(o - 2 * P2.bin_dims, o + 2 * P2.bin_dims))
    assert rep.details["boundary_mismatch"] > rep.details["boundary_limit"]
    assert not rep.passed and rep.worst_margin < 0


def test_four_corner_pe_posterior_passes_pe(four_corner):
    prior, o, post = four_corner
    rep = check_pe(prior, post, P2, o, local_competitors(o, P2, per_axis=4), 4096, sampler="grid")
    assert rep.passed
    assert rep.details["relative_face_residual"] <= 1e-7


# ---------------------------------------------------------------- PE

@pytest.mark.parametrize("sampler", ["mc", "grid", "quad"])
def test_pe_solver_posterior_passes(sampler):
    prior = GaussianMixture([[0.2], [0.7]], 0.02, [0.6, 0.4])
    o = np.array([0.4])
    post = mix(prior, 0.5, solve_pe_apex(prior, o, 0.01, P1), 0.5)
    rep = check_pe(prior, post, P1, o, local_competitors(o, P1), 2000, seed=3, sampler=sampler)
    assert rep.passed
    assert rep.details["relative_face_residual"] <= 1e-8


def test_pe_unchanged_posterior_fails():
    prior = GaussianMixture([[0.2], [0.7]], 0.02, [0.6, 0.4])
    rep = check_pe(prior, prior, P1, [0.4], local_competitors([0.4], P1), 500, sampler="grid")
    assert not rep.passed


def test_pe_empirical_update_passes():
    prior = GaussianMixture([[0.2, 0.3], [0.7, 0.6]], 0.02)
    o = np.array([0.4, 0.5])
    post = empirical_update(prior, o, 0.5)
    rep = check_pe(prior, post, P2, o, local_competitors(o, P2, per_axis=4), 1024, sampler="grid")
    assert rep.passed


def test_pe_input_validation():
    prior = GaussianMixture([[0.5]], 0.02)
    with pytest.raises(ValueError):
        check_pe(prior, prior, P1, [0.4], [[0.4]], 10)
    with pytest.raises(ValueError):
        check_pe(prior, prior, P1, [0.4], [[0.5]], 10, sampler="bogus")


def test_expected_ratio_for_unchanged_posterior_is_one():
    prior = GaussianMixture([[0.2], [0.7]], 0.02)
    vals, err = expected_ratio(prior, prior, P1, [[0.1], [0.5], [0.9]])
    np.testing.assert_allclose(vals, 1.0, atol=1e-12)
    assert np.all(err < 1e-12)


def test_expected_ratio_tracks_shift_average():
    prior = GaussianMixture([[0.2], [0.7]], 0.02, [0.6, 0.4])
    o = np.array([0.4])
    post = mix(prior, 0.5, PyramidKernel(o, [0.02], [0.41]), 0.5)
    vals, err = expected_ratio(prior, post, P1, [[0.4], [0.47]])
    from peerhood.mechanism import _thetas, payment_table
    table, _ = payment_table(PtsConfig(), prior, P1, [[0.4], [0.47]], _thetas(P1, 20_000, 0, "grid"),
                             peer_measure=post)
    np.testing.assert_allclose(vals, table.mean(axis=1), atol=1e-6)


def test_local_competitors_shape():
    c = local_competitors([0.5, 0.5], P2, per_axis=4)
    assert c.shape == (8 * 8 - 1 + 3 * 8, 2)
    assert not np.any(np.all(c == 0.5, axis=1))


# ---------------------------------------------------------------- links between conditions

@settings(max_examples=15)
@given(st.integers(0, 10_000), st.floats(0.1, 1.0))
def test_pi_implies_pe(seed, alpha):
    rng = np.random.default_rng(seed)
    prior = GaussianMixture(rng.random((3, 1)), rng.random() * 0.05 + 0.005, None)
    o = rng.random(1)
    post = empirical_update(prior, o, alpha)
    pi = check_pi(prior, post, P1, o, 300, Rect([-1.0], [2.0]), seed=seed)
    if pi.passed:
        assert check_pe(prior, post, P1, o, local_competitors(o, P1), 400, sampler="grid").passed


def test_pe_argmax_agrees_with_expected_payment():
    prior = GaussianMixture([[0.2], [0.7]], 0.02, [0.6, 0.4])
    o = np.array([0.4])
    post = mix(prior, 0.5, solve_pe_apex(prior, o, 0.01, P1), 0.5)
    offsets = np.arange(-5, 6) * 0.02
    pays = [expected_pay_under(PtsConfig(), prior, P1, o + d, post, 2000, sampler="grid").mean for d in offsets]
    assert offsets[int(np.argmax(pays))] == 0.0
