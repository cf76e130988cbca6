import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hscompress import compression as C
from hscompress import embeddings as E
from hscompress import spaces
from hscompress.errors import ConfigError, EstimationError

import oracles

F2 = spaces.FreeGroup(2)


def brute_arrays(pts, eps):
    dX = np.array([[oracles.free_distance(s, t) for t in pts] for s in pts], dtype=float)
    dY = np.sqrt(np.array([[oracles.tree_sq_distance(s, t, eps) for t in pts] for s in pts]))
    return dX, dY


@pytest.mark.parametrize("eps", [0.0, 0.25])
@pytest.mark.parametrize("strategy", [C.TREE_CLOSED_FORM, C.EXACT_PAIRWISE])
def test_profile_matches_brute_force(eps, strategy):
    pts = oracles.free_ball(4)
    dX, dY = brute_arrays(pts, eps)
    prof = C.compression_profile(F2, E.TreeEmbedding(eps), 8, strategy=strategy)
    np.testing.assert_allclose(prof.rho, oracles.brute_rho(dX, dY, 8), atol=1e-12)
    np.testing.assert_allclose(prof.rho_plus, oracles.brute_rho_plus(dX, dY, 8), atol=1e-12)


def test_closed_form_counts_match_pairwise():
    a = C.compression_profile(F2, E.TreeEmbedding(0.25), 8, strategy=C.TREE_CLOSED_FORM)
    b = C.compression_profile(F2, E.TreeEmbedding(0.25), 8, strategy=C.EXACT_PAIRWISE)
    assert [int(x) for x in a.pair_count] == [int(x) for x in b.pair_count]


def test_closed_form_counts_do_not_overflow():
    prof = C.compression_profile(F2, E.TreeEmbedding(0.0), 60)
    assert all(int(n) >= 0 for n in prof.pair_count)
    assert int(prof.pair_count[-1]) > 2**63


def test_sampled_agrees_with_exact():
    exact = C.compression_profile(F2, E.TreeEmbedding(0.25), 8, strategy=C.EXACT_PAIRWISE)
    samp = C.compression_profile(F2, E.TreeEmbedding(0.25), 8, strategy=C.SAMPLED, samples=200_000, seed=3)
    assert np.all(samp.rho >= exact.rho - 1e-12)
    np.testing.assert_allclose(samp.rho[:6], exact.rho[:6], atol=1e-12)
    assert samp.seed == 3 and samp.samples == 200_000


def test_sampled_is_deterministic():
    kw = dict(strategy=C.SAMPLED, samples=5000, seed=7)
    a = C.compression_profile(F2, E.TreeEmbedding(0.1), 6, **kw)
    b = C.compression_profile(F2, E.TreeEmbedding(0.1), 6, **kw)
    assert a.to_csv() == b.to_csv()


def test_threads_do_not_change_result():
    Z2 = spaces.LatticeZn(2)
    a = C.compression_profile(Z2, E.CoordinateIsometric(2), 12, threads=1)
    b = C.compression_profile(Z2, E.CoordinateIsometric(2), 12, threads=4)
    assert a.to_csv() == b.to_csv()


def test_isometry_on_z():
    prof = C.compression_profile(spaces.LatticeZn(1), E.CoordinateIsometric(1), 100)
    np.testing.assert_array_equal(prof.rho, prof.r_grid.astype(float))


def test_unweighted_tree_is_sqrt():
    prof = C.compression_profile(F2, E.TreeEmbedding(0.0), 16)
    np.testing.assert_allclose(prof.rho**2, prof.r_grid, rtol=0, atol=1e-12)


def test_weighted_tree_lower_constant():
    prof = C.compression_profile(F2, E.TreeEmbedding(0.25), 20)
    c = E.compression_lower_constant(0.25)
    assert np.all(prof.rho**2 >= c * prof.r_grid**1.5)


@pytest.mark.parametrize("eps", [0.0, 0.1, 0.25, 0.4])
def test_profile_invariants(eps):
    prof = C.compression_profile(F2, E.TreeEmbedding(eps), 12)
    assert np.all(np.diff(prof.rho) >= -1e-12)
    assert np.all(np.diff(prof.rho_plus) >= -1e-12)
    assert np.all(prof.rho_star >= 1)
    # rho(r) <= rho_plus(r): some pair at distance exactly r is below both
    assert np.all(prof.rho <= prof.rho_plus + 1e-12)


def test_profile_csv_header():
    prof = C.compression_profile(F2, E.TreeEmbedding(0), 4)
    lines = prof.to_csv().splitlines()
    assert lines[0] == "r,rho,rho_star,rho_plus,pairs"
    assert len(lines) == 5


def test_profile_at():
    prof = C.power_law_profile(0.5, 16)
    assert prof.at(4) == pytest.approx(2.0)
    assert prof.at(3.5) == prof.at(4)
    assert prof.at(0) == 0.0
    with pytest.raises(EstimationError):
        prof.at(17)


def test_truncated_profile_warns():
    with pytest.warns(UserWarning):
        prof = C.compression_profile(F2, E.TreeEmbedding(0), 10, radius=2)
    assert prof.r_max == 4


def test_unknown_strategy():
    with pytest.raises(ConfigError):
        C.compression_profile(F2, E.TreeEmbedding(0), 4, strategy="magic")
    with pytest.raises(ConfigError):
        C.compression_profile(spaces.LatticeZn(1), E.CoordinateIsometric(1), 4, strategy=C.TREE_CLOSED_FORM)


@settings(max_examples=40)
@given(st.floats(0.05, 2.0), st.integers(8, 64))
def test_power_law_recovery(alpha, r_max):
    prof = C.power_law_profile(alpha, r_max)
    est = C.asymptotic_compression(prof, (2, r_max))
    assert est.slope == pytest.approx(alpha, abs=1e-9)


def test_window_validation():
    prof = C.power_law_profile(0.75, 16)
    with pytest.raises(EstimationError):
        C.asymptotic_compression(prof, (1, 16))
    with pytest.raises(EstimationError):
        C.asymptotic_compression(prof, (8, 40))
    with pytest.raises(EstimationError):
        C.asymptotic_compression(prof, (8, 10))


def test_slopes_frozen():
    # closed-form profiles; cross-checked against the regression oracle
    p0 = C.compression_profile(F2, E.TreeEmbedding(0.0), 16)
    p1 = C.compression_profile(F2, E.TreeEmbedding(0.25), 32)
    e0 = C.asymptotic_compression(p0, (8, 16))
    e1 = C.asymptotic_compression(p1, (8, 16))
    assert e0.slope == pytest.approx(0.5, abs=1e-9)
    assert e1.slope == pytest.approx(0.7034411884305813, abs=1e-9)
    r = np.arange(8, 17)
    assert e1.slope == pytest.approx(oracles.least_squares_slope(np.log(r), np.log(p1.rho_star[7:16])), abs=1e-12)
    # default tail window on radius 16 (r_max 32)
    assert 0.72 <= C.asymptotic_compression(p1).slope <= 0.78


def test_lipschitz_fit():
    x = np.arange(1, 20, dtype=float)
    fit = C.lipschitz_fit(x, x)
    assert fit.D == 1 and fit.C == pytest.approx(18 / 19)
    fit = C.lipschitz_fit(x, x, scale=0, D=0)
    assert fit.C == 1 and fit.D == 0
    fit = C.lipschitz_fit(x, 2 * x + 3, D=3)
    assert fit.C == pytest.approx(2) and fit.max_violation == 0
    with pytest.raises(EstimationError):
        C.lipschitz_fit([0.0], [1.0])


def test_growth_exponent():
    r = np.array([1, 2, 4, 8], dtype=float)
    assert C.growth_exponent(r**0.5, r) == pytest.approx(0.5)
    assert C.growth_exponent([3, 3, 3, 3], r) == pytest.approx(0.0)


def test_composition_identity_and_l1():
    Z2 = spaces.LatticeZn(2)
    rep = C.composition_check(E.L1ToL2(), E.CoordinateIsometric(2), Z2, 16)
    assert rep.passed
    assert rep.details["R_fg"] == pytest.approx(0.5, abs=0.05)
    rep = C.composition_check(E.Identity(), E.CoordinateIsometric(2), Z2, 12)
    assert rep.passed and rep.details["profiles_equal"]


def test_composition_short_circuit():
    rep = C.composition_check(E.Identity(), E.Constant(), spaces.LatticeZn(1), 10)
    assert rep.passed and rep.details["short_circuit"]


def test_product_examples():
    Z = spaces.LatticeZn(1)
    rep = C.product_check(E.CoordinateIsometric(1), E.CoordinateIsometric(1), Z, Z, 24)
    assert rep.passed and rep.details["R_h"] == pytest.approx(1.0, abs=0.02)
    rep = C.product_check(E.CoordinateIsometric(1), E.TreeEmbedding(0), Z, F2, 12)
    assert rep.passed and rep.details["R_h"] == pytest.approx(0.5, abs=0.05)
    assert not rep.details["pointwise_violations"]


def test_product_with_point():
    Z, pt = spaces.LatticeZn(1), spaces.PointCloud("pt", np.zeros((1, 1)))
    rep = C.product_check(E.CoordinateIsometric(1), E.Constant(), Z, pt, 16)
    assert rep.passed
    assert rep.details["R_g"] is None
    np.testing.assert_allclose(rep.details["rho_h"], np.arange(1, 17))


def test_rho_function_real_thresholds():
    dX = np.array([1.0, 2.0, 3.0])
    dY = np.array([5.0, 1.0, 4.0])
    rho = C._rho_function(dX, dY)
    assert rho(0.5) == 1.0 and rho(2.5) == 4.0 and rho(3.5) == math.inf and rho(0) == 0.0
