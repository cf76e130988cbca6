"""The fourteen acceptance criteria, each at its stated tolerance.

Every test records one ``criterion N: PASS|FAIL`` line before asserting; the
lines are printed together at the end of the run (see ``conftest.py``).
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from hscompress import coarse, equivariant, kernels
from hscompress import compression as C
from hscompress import embeddings as E
from hscompress import fixtures as fx
from hscompress import spaces

import oracles

LINES: dict[int, str] = {}
F2 = spaces.FreeGroup(2)


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES[n] = line
    print(line)
    assert ok, line


def representative(ks: int, kt: int, p: int) -> tuple[str, str]:
    prefix = "a" * p
    return prefix + "b" * (ks - p), prefix + "B" * (kt - p)


def test_01_tree_identity_on_b8():
    t0 = time.perf_counter()
    triples = C.tree_triples(2, 8)
    bad = 0
    for ks, kt, p, _ in triples:
        cf = E.weighted_tree_closed_form(ks, kt, p, 0.0)
        s, t = representative(ks, kt, p)
        vec = (E.TreeEmbedding(0).embed(s) - E.TreeEmbedding(0).embed(t)).norm_sq()
        d = oracles.free_distance(s, t)
        if not (cf == vec == d == F2.distance(s, t)) or not isinstance(vec, int):
            bad += 1
    pairs = sum(n for *_, n in triples)
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and pairs == 13121 * 13120 and elapsed < 5
    record(1, ok, f"{len(triples)} triples cover {pairs} ordered pairs, {bad} mismatches, {elapsed:.2f}s")


def test_02_weighted_lower_bound():
    t0 = time.perf_counter()
    viol = {}
    for eps in (0.1, 0.25, 0.4):
        prof = C.compression_profile(F2, E.TreeEmbedding(eps), 24, radius=12)
        lhs = prof.rho**2
        rhs = prof.r_grid ** (1 + 2 * eps) / (2 ** (2 * eps + 1) * (2 * eps + 1))
        viol[eps] = int(np.sum(lhs < rhs))
    elapsed = time.perf_counter() - t0
    ok = sum(viol.values()) == 0 and elapsed < 10
    record(2, ok, f"violations {viol}, {elapsed:.2f}s")


def test_03_slope_recovery():
    p0 = C.compression_profile(F2, E.TreeEmbedding(0.0), 16)
    p1 = C.compression_profile(F2, E.TreeEmbedding(0.25), 16)
    s0 = C.asymptotic_compression(p0, (8, 16)).slope
    s1 = C.asymptotic_compression(p1, (8, 16)).slope
    synth = {a: C.asymptotic_compression(C.power_law_profile(a, 64), (8, 64)).slope for a in (0.25, 0.5, 0.75, 1.0)}
    worst = max(abs(v - a) for a, v in synth.items())
    ok = abs(s0 - 0.5) <= 0.05 and abs(s1 - 0.75) <= 0.05 and worst <= 1e-6
    record(3, ok, f"eps=0 slope {s0:.4f}, eps=0.25 slope {s1:.4f}, synthetic max error {worst:.1e}")


def test_04_generator_step_bound():
    bound = 1 + E.lipschitz_generator_bound(0.25)
    worst = 0.0
    for ks, kt, p, _ in C.tree_triples(2, 10):
        if ks + kt - 2 * p == 1:
            worst = max(worst, E.weighted_tree_closed_form(ks, kt, p, 0.25))
    # direct check on the actual edges of a smaller ball
    f = E.TreeEmbedding(0.25)
    for s in F2.ball(6).points:
        if s:
            worst = max(worst, (f.embed(s) - f.embed(s[:-1])).norm_sq())
    ok = worst <= bound
    record(4, ok, f"max squared edge image {worst:.6f} <= {bound}")


def test_05_staircase_and_l1_pipeline():
    rng = np.random.default_rng(2024)
    g = E.Staircase()
    bad = 0
    for _ in range(1000):
        x = Fraction(int(rng.integers(-10**6, 10**6)), int(rng.integers(1, 10**4)))
        y = Fraction(int(rng.integers(-10**6, 10**6)), int(rng.integers(1, 10**4)))
        if (g.embed(x) - g.embed(y)).norm_sq() != abs(x - y):
            bad += 1
    Z3 = spaces.LatticeZn(3)
    prof = C.compression_profile(Z3, E.Compose(E.L1ToL2(), E.CoordinateIsometric(3)), 16)
    slope = C.asymptotic_compression(prof).slope
    ok = bad == 0 and abs(slope - 0.5) <= 0.05
    record(5, ok, f"{bad} inexact staircase pairs of 1000, l1->l2 on Z^3 slope {slope:.4f}")


def test_06_product_formula():
    Z = spaces.LatticeZn(1)
    zz = C.product_check(E.CoordinateIsometric(1), E.CoordinateIsometric(1), Z, Z, 24)
    zf = C.product_check(E.CoordinateIsometric(1), E.TreeEmbedding(0), Z, F2, 12)
    viol = len(zz.details["pointwise_violations"]) + len(zf.details["pointwise_violations"])
    a, b = zz.details["R_h"], zf.details["R_h"]
    ok = abs(a - 1) <= 0.02 and abs(b - 0.5) <= 0.05 and viol == 0
    record(6, ok, f"ZxZ slope {a:.4f}, ZxF2 slope {b:.4f}, pointwise violations {viol}")


def test_07_composition():
    Z2, Z3 = spaces.LatticeZn(2), spaces.LatticeZn(3)
    cases = [
        (E.L1ToL2(), E.CoordinateIsometric(2), Z2, 16),
        (E.L1ToL2(), E.CoordinateIsometric(3), Z3, 12),
        (E.L1ToL2(), E.Dilation(2), Z2, 16),
        (E.Identity(), E.CoordinateIsometric(2), Z2, 12),
    ]
    reps = [C.composition_check(f, g, X, r) for f, g, X, r in cases]
    viol = sum(len(r.details["pointwise_violations"]) for r in reps)
    gaps = [r.details["R_fg"] - r.details["product_bound"] for r in reps]
    ok = viol == 0 and min(gaps) >= -0.03 and all(r.passed for r in reps)
    record(7, ok, f"{len(reps)} compositions, pointwise violations {viol}, min R_fg - R_f R_g {min(gaps):.4f}")


def test_08_kernel_psd():
    ball = F2.ball(5)
    worst, diag_ok = math.inf, True
    for eps in (0.0, 0.25):
        for k in (1, 2, 4, 8):
            km = kernels.schoenberg_kernel(E.TreeEmbedding(eps), k, ball, F2)
            lo, _ = kernels.psd_check(km)
            worst = min(worst, lo)
            diag_ok = diag_ok and bool(np.all(np.diag(km.entries) == 1.0))
    ok = worst >= -1e-8 and diag_ok
    record(8, ok, f"min eigenvalue {worst:.3e}, diagonal exactly 1: {diag_ok}")


def test_09_schur_suite():
    t0 = time.perf_counter()
    km = kernels.kappa_kernel(E.TreeEmbedding(0.25), 0.25, F2.ball(6), F2)
    reps = kernels.schur_suite(km)
    row_ok = all(r.max_row_sum <= r.analytic_bound for r in reps)
    norm_ok = all(r.spectral_norm <= r.max_row_sum * (1 + 1e-9) + 1e-12 for r in reps)
    elapsed = time.perf_counter() - t0
    ok = row_ok and norm_ok and elapsed < 60
    record(9, ok, f"{len(reps)} truncations, row sums <= bound: {row_ok}, norm <= row sum: {norm_ok}, {elapsed:.1f}s")


def test_10_finite_width():
    km = kernels.schoenberg_kernel(E.TreeEmbedding(0.25), 4, F2.ball(5), F2)
    reps = kernels.width_sweep(km, [2, 4, 6, 8])
    errs = [r.sup_error for r in reps]
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    chain = all(r.sup_error <= r.chain_bound for r in reps)
    width = all(r.width_approx <= 2 * r.w for r in reps)
    eig = min(r.min_eig_approx for r in reps)
    ok = decreasing and chain and width and eig >= -1e-8
    record(10, ok, f"sup errors {[f'{e:.3g}' for e in errs]}, chain bound {chain}, width <= 2w {width}, min eig {eig:.2e}")


def random_chain(rng, delta):
    n = int(rng.integers(2, 60))
    dim = int(rng.integers(1, 4))
    steps = rng.normal(size=(n, dim))
    steps *= (rng.uniform(0, delta, size=n) / np.linalg.norm(steps, axis=1))[:, None]
    return np.vstack([np.zeros(dim), np.cumsum(steps, axis=0)])


def test_11_extraction():
    rng = np.random.default_rng(11)
    viol = {"gap": 0, "terminal": 0, "count": 0}
    tried = 0
    while tried < 1000:
        delta = float(rng.uniform(0.1, 4.0))
        pts = random_chain(rng, delta)
        d = float(np.linalg.norm(pts[-1] - pts[0]))
        if d == 0:
            continue
        tried += 1
        lam = max(1.0, float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1))) / d)
        sub = coarse.extract_subchain(list(pts), delta, metric=lambda a, b: float(np.linalg.norm(a - b)))
        viol["gap"] += sum(not (delta / 2 <= g <= 1.5 * delta + 1e-12) for g in sub.gaps)
        viol["terminal"] += not sub.terminal_gap < delta / 2
        viol["count"] += not sub.m <= 2 * lam * d / delta + 1e-9
    ok = sum(viol.values()) == 0
    record(11, ok, f"{tried} chains, violations {viol}")


def test_12_appendix_constants():
    c = coarse.coarse_to_qi_constants(2, 0, 1, 1)
    sf, sg, K = fx.coarse_eq_samples()
    f_fit = C.lipschitz_fit(*sf.pairs()[:2])
    g_fit = C.lipschitz_fit(*sg.pairs()[:2])
    Cq, Dq = coarse.equivalence_constants(f_fit.C, f_fit.D, g_fit.C, g_fit.D, K)
    qi = coarse.check_quasi_isometry(sf, C=Cq, D=Dq)
    consts = coarse.coarse_to_qi_constants(Cq, Dq, 1, 1, K)
    qg_src = coarse.check_quasi_geodesic(sf.dX, 1, 1)
    qg_img = coarse.image_quasi_geodesic(sf, consts)
    ok = (c.delta_prime, c.lambda_prime) == (3, 13) and qi.passed and qg_src.passed and qg_img.passed
    record(
        12,
        ok,
        f"(delta', lambda') = ({c.delta_prime:g}, {c.lambda_prime:g}); coarse-eq QI C={Cq:.3f} D={Dq:.3f} "
        f"{qi.verdict}; image quasi-geodesic {'pass' if qg_img.passed else 'fail'}",
    )


def test_13_cocycle():
    t0 = time.perf_counter()
    resid = equivariant.verify_cocycle(equivariant.random_pairs(13, 10_000, 8))
    est = equivariant.equivariant_compression(16, window=(8, 16))
    exact = equivariant.sqrt_profile_exact(est)
    ok = resid <= 1e-12 and exact and est.consistent and abs(est.slope - 0.5) <= 0.02
    record(13, ok, f"max residual {resid:.1e}, rho_b = sqrt(r): {exact}, slope {est.slope:.4f}, {time.perf_counter() - t0:.1f}s")


def test_14_pathologies():
    f = coarse.classify_map(fx.ex0_f_sample())
    g = coarse.classify_map(fx.ex0_g_sample())
    f_ok = f["uniform_embedding"] == "pass" and f["large_scale_lipschitz"] == "pass" and f["lipschitz"] == "fail"
    g_ok = g["uniform_embedding"] == "pass" and g["large_scale_lipschitz"] == "fail"
    qg = coarse.check_quasi_geodesic(fx.heis_center_cloud(12).dist, 2, 3)
    qi = coarse.check_quasi_isometry(fx.heis_center_sample(100, cap=40))
    Cs = qi.details["C_by_range"]
    ok = f_ok and g_ok and not qg.passed and not qi.passed
    record(
        14,
        ok,
        f"ex0 f {f_ok} (pointwise C growth {f['pointwise_growth']:.2f}), ex0 g {g_ok} "
        f"(C growth {g['large_scale_growth']:.2f}), Heisenberg QG {'fail' if not qg.passed else 'pass'}, "
        f"QI C {Cs[0]:.3f} -> {Cs[-1]:.3f} {qi.verdict}",
    )
