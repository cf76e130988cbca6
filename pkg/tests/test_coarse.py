import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hscompress import coarse
from hscompress.compression import lipschitz_fit
from hscompress import fixtures as fx
from hscompress.errors import DomainError, InputError

import oracles


def line(points):
    p = np.asarray(points, dtype=float)
    return np.abs(p[:, None] - p[None, :])


class TestUniformEmbedding:
    def test_ex0_f(self):
        assert coarse.check_uniform_embedding(fx.ex0_f_sample(), 12).passed

    def test_ex0_g(self):
        s = fx.ex0_g_sample()
        assert coarse.check_uniform_embedding(s, 400).passed

    def test_constant_fails(self):
        rep = coarse.check_uniform_embedding(fx.constant_sample(), 20)
        assert rep.verdict == "fail"
        assert max(rep.details["rho_minus"]) == 0

    def test_inconclusive_when_sample_too_small(self):
        rep = coarse.check_uniform_embedding(fx.isometry_sample(5), 50)
        assert rep.verdict == "inconclusive"

    @pytest.mark.parametrize("factory", [fx.isometry_sample, fx.dilation_sample, lambda: fx.coarse_eq_samples()[0]])
    def test_quasi_isometries_are_uniform(self, factory):
        assert coarse.check_uniform_embedding(factory(), 20).passed


class TestClassify:
    def test_ex0_f(self):
        c = coarse.classify_map(fx.ex0_f_sample())
        assert c["uniform_embedding"] == "pass"
        assert c["large_scale_lipschitz"] == "pass"
        assert c["lipschitz"] == "fail"
        assert c["pointwise_growth"] >= 0.9

    def test_ex0_g(self):
        c = coarse.classify_map(fx.ex0_g_sample())
        assert c["uniform_embedding"] == "pass"
        assert c["large_scale_lipschitz"] == "fail"

    def test_isometry(self):
        c = coarse.classify_map(fx.isometry_sample())
        assert c["large_scale_lipschitz"] == c["lipschitz"] == "pass"
        assert c["pointwise_C"][-1] == 1

    def test_genset_change(self):
        c = coarse.classify_map(fx.f2_genset_sample())
        assert c["uniform_embedding"] == c["large_scale_lipschitz"] == c["lipschitz"] == "pass"


def test_grows():
    r = [1, 2, 4, 8, 16]
    assert coarse.grows([1, 2, 4, 8, 16], r)
    assert not coarse.grows([1, 1.5, 1.8, 1.9, 1.95], r)
    assert coarse.grows([1, 1, 1, np.inf, np.inf], r)
    assert not coarse.grows([0, 0, 0, 0, 0], r)


class TestQuasiGeodesic:
    def test_integers_are_geodesic(self):
        w = coarse.check_quasi_geodesic(line(range(12)), 1, 1)
        assert w.passed and w.connected and w.worst_ratio == pytest.approx(1)
        (pair, chain), = list(w.chains.items())[:1]
        assert chain == list(range(pair[0], pair[1] + 1))

    def test_squares_fail(self):
        w = coarse.check_quasi_geodesic(line([n * n for n in range(1, 10)]), 1, 1)
        assert not w.passed and not w.connected
        assert w.failures[0]["components"] == 9

    def test_heisenberg_center_fails(self):
        cloud = fx.heis_center_cloud(12)
        w = coarse.check_quasi_geodesic(cloud.dist, 2, 3)
        assert not w.passed
        assert w.failures[0]["components"] > 1
        assert min(w.failures[0]["gaps"]) > 3

    def test_weighted_lengths(self):
        # three points; the detour 0 -> 1 -> 2 has length 2 vs d = 1.9
        D = np.array([[0, 1, 1.9], [1, 0, 1], [1.9, 1, 0]])
        assert coarse.check_quasi_geodesic(D, 1.1, 1).passed
        assert not coarse.check_quasi_geodesic(D, 1.01, 1).passed

    def test_duplicate_points(self):
        with pytest.raises(InputError):
            coarse.check_quasi_geodesic(np.zeros((2, 2)), 1, 1)

    def test_bad_constants(self):
        with pytest.raises(DomainError):
            coarse.check_quasi_geodesic(line(range(3)), 0.5, 1)


class TestExtract:
    def test_example(self):
        sub = coarse.extract_subchain([0, 0.4, 0.8, 1.2, 1.6, 2.0], 1)
        assert sub.indices == [0, 2, 4]
        assert sub.path == [0, 2, 4, 5]
        assert sub.gaps == pytest.approx([0.8, 0.8])
        assert sub.terminal_gap == pytest.approx(0.4)
        assert sub.m == 2

    def test_short_chain(self):
        sub = coarse.extract_subchain([0, 0.3], 1)
        assert sub.m == 0 and sub.indices == [0]

    def test_geodesic(self):
        sub = coarse.extract_subchain(list(range(11)), 1)
        assert sub.indices == list(range(11))
        assert all(g == 1 for g in sub.gaps)

    def test_step_too_long(self):
        with pytest.raises(DomainError):
            coarse.extract_subchain([0, 2], 1)

    def test_custom_metric(self):
        pts = [(0, 0), (0, 1), (1, 1), (2, 1)]
        l1 = lambda a, b: abs(a[0] - b[0]) + abs(a[1] - b[1])  # noqa: E731
        sub = coarse.extract_subchain(pts, 2, metric=l1)
        assert sub.indices == [0, 1, 2, 3]


@settings(max_examples=200)
@given(
    st.lists(st.floats(-1.0, 1.0, allow_nan=False), min_size=1, max_size=40),
    st.floats(0.2, 3.0),
)
def test_extract_bounds(steps, delta):
    pts = np.concatenate([[0.0], np.cumsum(np.asarray(steps) * delta)]).tolist()
    sub = coarse.extract_subchain(pts, delta)
    assert sub.indices == oracles.greedy_subchain(pts, delta)
    for g in sub.gaps:
        assert delta / 2 - 1e-9 <= g <= 1.5 * delta + 1e-9
    assert sub.terminal_gap < delta / 2 + 1e-9
    length = float(np.sum(np.abs(np.diff(pts))))
    assert sub.m * delta / 2 <= length + 1e-9


def test_rho_plus_function():
    rp = coarse.rho_plus_function([1, 2, 3], [5, 1, 4])
    assert rp(0.5) == 0 and rp(1) == 5 and rp(3) == 5


def test_lslip_examples():
    x = np.arange(1, 10, dtype=float)
    # on integer data rho_plus(3/2) = 1 and rho_plus(1/2) = 0
    fit = coarse.lslip_from_rho_plus(coarse.rho_plus_function(x, x), 1, 1)
    assert fit.C == 2 and fit.D == 0
    # the isometry with a continuous rho_plus(r) = r
    fit = coarse.lslip_from_rho_plus(lambda r: r, 1, 1)
    assert (fit.C, fit.D) == (3, 0.5)
    fit = coarse.lslip_from_rho_plus(lambda r: 0.0, 1, 1)
    assert fit.C == 0 and fit.D == 0


def test_lslip_on_ex0_f():
    s = fx.ex0_f_sample(20)
    dX, dY, _ = s.pairs()
    lam, delta = 2.0, 1.5
    assert coarse.check_quasi_geodesic(s.dX, lam, delta).passed
    fit = coarse.lslip_from_rho_plus(coarse.rho_plus_function(dX, dY), lam, delta)
    assert np.all(dY <= fit.C * dX + fit.D + 1e-9)


@pytest.mark.parametrize("C, D, lam, delta, dp, lp", [(2, 0, 1, 1, 3, 13), (1, 0, 1, 1, 1.5, 4)])
def test_coarse_to_qi_constants(C, D, lam, delta, dp, lp):
    c = coarse.coarse_to_qi_constants(C, D, lam, delta)
    assert c.delta_prime == pytest.approx(dp) and c.lambda_prime == pytest.approx(lp)


def test_coarse_to_qi_linear_in_D():
    a = coarse.coarse_to_qi_constants(1, 10, 1, 1).delta_prime
    b = coarse.coarse_to_qi_constants(1, 20, 1, 1).delta_prime
    assert b - a == pytest.approx(10)
    with pytest.raises(DomainError):
        coarse.coarse_to_qi_constants(0, 0, 1, 1)


class TestQuasiIsometry:
    def test_dilation_fit(self):
        rep = coarse.check_quasi_isometry(fx.dilation_sample())
        assert rep.passed
        assert rep.details["C"] == 2 and rep.details["D"] == 0

    def test_verify_mode(self):
        s = fx.dilation_sample()
        assert coarse.check_quasi_isometry(s, C=2, D=0).passed
        assert not coarse.check_quasi_isometry(s, C=1.5, D=0).passed

    def test_genset(self):
        rep = coarse.check_quasi_isometry(fx.f2_genset_sample())
        assert rep.passed
        assert np.isfinite(rep.details["C"])

    def test_heisenberg_fails_over_growing_range(self):
        rep = coarse.check_quasi_isometry(fx.heis_center_sample(100, cap=40))
        assert not rep.passed
        Cs = rep.details["C_by_range"]
        assert Cs[-1] > Cs[0]

    def test_density(self):
        s = fx.dilation_sample(10)
        targets = np.arange(-20, 21)
        images = 2 * np.arange(-10, 11)
        dense = np.abs(targets[:, None] - images[None, :])
        assert coarse.check_quasi_isometry(s, K=1, C=2, D=0, dense_dist=dense).passed
        assert not coarse.check_quasi_isometry(s, K=0.5, C=2, D=0, dense_dist=dense).passed
        with pytest.raises(InputError):
            coarse.check_quasi_isometry(s, C=2, dense_dist=dense)


def test_coarse_equivalence_chain():
    sf, sg, K = fx.coarse_eq_samples()
    fx_, gx_ = sf.pairs(), sg.pairs()
    f_fit = lipschitz_fit(fx_[0], fx_[1])
    g_fit = lipschitz_fit(gx_[0], gx_[1])
    C, D = coarse.equivalence_constants(f_fit.C, f_fit.D, g_fit.C, g_fit.D, K)
    assert coarse.check_quasi_isometry(sf, C=C, D=D).passed
    consts = coarse.coarse_to_qi_constants(C, D, 1, 1, K)
    assert coarse.image_quasi_geodesic(sf, consts).passed


def test_map_sample_validation():
    with pytest.raises(InputError):
        coarse.MapSample("x", np.zeros((2, 2)), np.zeros((3, 3)))
