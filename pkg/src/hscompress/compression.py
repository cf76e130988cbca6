"""Compression and expansion profiles over finite balls.

Every profile is an infimum (or supremum) over the pairs inside a finite
ball, so ``rho`` is biased upward relative to the true compression of the
infinite space.  Reports carry that caveat in ``notes``.
"""
from __future__ import annotations

import csv
import io
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .embeddings import Compose, DirectSum, EmbeddingSpec, TreeEmbedding, closed_form_table
from .errors import CapacityError, ConfigError, EstimationError
from .reports import CheckReport, verdict
from .spaces import FreeGroup, GroupSpec, Product, free_sphere_size

EXACT_PAIRWISE = "exact-pairwise"
TREE_CLOSED_FORM = "tree-closed-form"
SAMPLED = "sampled"

DEFAULT_SAMPLES = 1_000_000
DEFAULT_PAIRWISE_CAP = 6000
_TOL = 1e-9


def pairwise_cap() -> int:
    return int(os.environ.get("HSCOMPRESS_MAX_PAIRWISE", DEFAULT_PAIRWISE_CAP))


@dataclass(frozen=True)
class CompressionProfile:
    r_grid: np.ndarray
    rho: np.ndarray
    rho_plus: np.ndarray
    pair_count: np.ndarray
    strategy: str
    seed: int | None = None
    samples: int | None = None
    radius: int | None = None
    notes: tuple = ()

    @property
    def r_max(self) -> int:
        return int(self.r_grid[-1])

    @property
    def rho_star(self) -> np.ndarray:
        return np.maximum(self.rho, 1.0)

    def at(self, r: float) -> float:
        """Compression at a real threshold: the infimum over ``d >= r``."""
        if r <= 0:
            return 0.0
        k = math.ceil(r - _TOL)
        if k > self.r_max:
            raise EstimationError(f"profile ends at r={self.r_max}, asked for {r}")
        return float(self.rho[k - 1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "rho", "rho_star", "rho_plus", "pairs"])
        for r, a, b, c, n in zip(self.r_grid, self.rho, self.rho_star, self.rho_plus, self.pair_count):
            w.writerow([int(r), repr(float(a)), repr(float(b)), repr(float(c)), int(n)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "samples": self.samples,
            "radius": self.radius,
            "r": self.r_grid.tolist(),
            "rho": self.rho.tolist(),
            "rho_star": self.rho_star.tolist(),
            "rho_plus": self.rho_plus.tolist(),
            "pairs": self.pair_count.tolist(),
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class AsymptoticEstimate:
    slope: float
    tail_min: float
    window: tuple
    residual: float
    strategy: str = ""

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "tail_min": self.tail_min,
            "window": list(self.window),
            "residual": self.residual,
            "strategy": self.strategy,
        }


@dataclass(frozen=True)
class LipschitzFit:
    C: float
    D: float
    max_violation: float = 0.0
    scale: float | None = None


# -- bucket accumulation ------------------------------------------------------------

class _Buckets:
    """Per-integer-distance min/max/count of image distances.

    Lower buckets use ``floor(dX)`` (``dX >= r`` iff ``floor(dX) >= r``),
    upper buckets use ``ceil(dX)`` (``dX <= r`` iff ``ceil(dX) <= r``), so
    real-valued source metrics are handled exactly on the integer grid.
    """

    def __init__(self):
        self.lo_min: dict[int, float] = {}
        self.up_max: dict[int, float] = {}
        self.count: dict[int, int] = {}

    def add(self, dX: np.ndarray, dY: np.ndarray, weight: np.ndarray | None = None):
        keep = dX > _TOL
        dX, dY = dX[keep], dY[keep]
        if weight is not None:
            weight = weight[keep]
        if dX.size == 0:
            return
        lo = np.floor(dX + _TOL).astype(np.int64)
        up = np.ceil(dX - _TOL).astype(np.int64)
        for b in np.unique(lo):
            sel = lo == b
            m = float(dY[sel].min())
            self.lo_min[int(b)] = min(self.lo_min.get(int(b), math.inf), m)
            n = int(sel.sum()) if weight is None else int(weight[sel].sum())
            self.count[int(b)] = self.count.get(int(b), 0) + n
        for b in np.unique(up):
            m = float(dY[up == b].max())
            self.up_max[int(b)] = max(self.up_max.get(int(b), -math.inf), m)

    def merge(self, other: "_Buckets"):
        for b, v in other.lo_min.items():
            self.lo_min[b] = min(self.lo_min.get(b, math.inf), v)
        for b, v in other.up_max.items():
            self.up_max[b] = max(self.up_max.get(b, -math.inf), v)
        for b, v in other.count.items():
            self.count[b] = self.count.get(b, 0) + v

    def profile(self, r_max: int, strategy: str, **meta) -> CompressionProfile:
        if not self.lo_min:
            raise EstimationError("no pairs at positive distance")
        realized = max(self.lo_min)
        notes = list(meta.pop("notes", ()))
        if realized < r_max:
            warnings.warn(f"largest realized distance is {realized}; profile truncated from r_max={r_max}")
            notes.append(f"truncated at r={realized} (no pairs at distance >= {realized + 1})")
            r_max = realized
        if r_max < 1:
            raise EstimationError("profile needs at least one pair at distance >= 1")
        top = max(realized, max(self.up_max))
        lo = np.full(top + 2, math.inf)
        up = np.full(top + 2, -math.inf)
        cnt = np.zeros(top + 2, dtype=object)  # closed-form counts overflow int64
        for b, v in self.lo_min.items():
            lo[b] = v
            cnt[b] = self.count[b]
        for b, v in self.up_max.items():
            up[b] = v
        suffix_min = np.minimum.accumulate(lo[::-1])[::-1]
        prefix_max = np.maximum.accumulate(np.maximum(up, 0.0))
        r = np.arange(1, r_max + 1)
        return CompressionProfile(
            r_grid=r,
            rho=suffix_min[r],
            rho_plus=prefix_max[r],
            pair_count=cnt[r],
            strategy=strategy,
            notes=tuple(notes),
            **meta,
        )


def profile_from_distances(dX, dY, r_max: int, strategy: str = EXACT_PAIRWISE, **meta) -> CompressionProfile:
    """Profile from flat arrays of paired source and image distances."""
    b = _Buckets()
    b.add(np.asarray(dX, dtype=float).ravel(), np.asarray(dY, dtype=float).ravel())
    return b.profile(r_max, strategy, **meta)


def power_law_profile(alpha: float, r_max: int, scale: float = 1.0) -> CompressionProfile:
    """Synthetic profile ``scale * r**alpha``."""
    r = np.arange(1, r_max + 1)
    rho = scale * r.astype(float) ** alpha
    return CompressionProfile(r, rho, rho.copy(), np.ones_like(r), strategy="synthetic")


# -- strategies ------------------------------------------------------------------------

def _ball_radius(r_max: int) -> int:
    return max(1, math.ceil(r_max / 2))


def _bias_note(radius: int) -> str:
    return f"rho is an infimum over pairs inside the ball of radius {radius} only"


def _pairwise(space, embedding, points, r_max, radius, threads: int = 1, block: int = 512):
    n = len(points)
    cap = pairwise_cap()
    if n > cap:
        raise CapacityError(
            f"exact pairwise enumeration over {n} points exceeds the cap of {cap}; "
            "use the sampled strategy",
            predicted=n,
            cap=cap,
        )
    pts = list(points)

    def run(i0):
        rows = pts[i0 : i0 + block]
        dX = space.distance_matrix(rows, pts)
        dY = embedding.image_distances(rows, pts)
        ii = np.arange(i0, i0 + len(rows))[:, None]
        upper = np.arange(n)[None, :] > ii
        b = _Buckets()
        b.add(dX[upper], dY[upper])
        return b

    starts = range(0, n, block)
    total = _Buckets()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, starts))
    else:
        parts = [run(i0) for i0 in starts]
    for p in parts:
        total.merge(p)
    return total.profile(r_max, EXACT_PAIRWISE, radius=radius, notes=(_bias_note(radius),))


def tree_triples(rank: int, R: int):
    """Realizable ``(k_s, k_t, p, ordered_pair_count)`` for words in the ball of radius ``R``."""
    q = 2 * rank - 1
    out = []
    for ks in range(R + 1):
        for kt in range(R + 1):
            for p in range(min(ks, kt) + 1):
                if p == ks == kt:
                    continue
                c = 2 * rank if p == 0 else q
                prefixes = free_sphere_size(rank, p)
                if p < ks and p < kt:
                    if c < 2:
                        continue
                    n = prefixes * c * (c - 1) * q ** (ks - p - 1) * q ** (kt - p - 1)
                else:
                    longer = max(ks, kt)
                    n = prefixes * c * q ** (longer - p - 1)
                out.append((ks, kt, p, n))
    return out


def _tree_closed_form(space: FreeGroup, embedding: TreeEmbedding, r_max: int, radius: int):
    triples = np.array(tree_triples(space.rank, radius), dtype=object)
    ks = triples[:, 0].astype(np.int64)
    kt = triples[:, 1].astype(np.int64)
    p = triples[:, 2].astype(np.int64)
    T = closed_form_table(radius, embedding.eps)
    dX = (ks + kt - 2 * p).astype(float)
    dY = np.sqrt(T[ks, kt, p])
    # ordered counts are symmetric in (ks, kt); halve to count unordered pairs
    weight = np.array([int(n) for n in triples[:, 3]], dtype=object)
    b = _Buckets()
    b.add(dX, dY)
    counts: dict[int, int] = {}
    for d, n in zip(dX.astype(int), weight):
        counts[int(d)] = counts.get(int(d), 0) + int(n)
    b.count = {d: n // 2 for d, n in counts.items()}
    return b.profile(r_max, TREE_CLOSED_FORM, radius=radius, notes=(_bias_note(radius),))


def _sampled(space, embedding, points, r_max, radius, seed: int, samples: int):
    rng = np.random.default_rng(seed)
    n = len(points)
    if n < 2:
        raise EstimationError("sampling needs at least two points")
    pts = list(points)
    b = _Buckets()
    batch = 50_000
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        i = rng.integers(0, n, size=m)
        j = rng.integers(0, n - 1, size=m)
        j = j + (j >= i)  # uniform over j != i
        A = [pts[k] for k in i]
        B = [pts[k] for k in j]
        b.add(space.paired_distances(A, B), embedding.paired_image_distances(A, B))
        done += m
    note = f"sampled {samples} uniform pairs with seed {seed}; counts are sample counts"
    return b.profile(r_max, SAMPLED, seed=seed, samples=samples, radius=radius, notes=(_bias_note(radius), note))


def compression_profile(
    space: GroupSpec,
    embedding: EmbeddingSpec,
    r_max: int,
    strategy: str = "auto",
    seed: int = 0,
    samples: int = DEFAULT_SAMPLES,
    threads: int = 1,
    radius: int | None = None,
) -> CompressionProfile:
    """Compression ``rho(r)`` and expansion ``rho_plus(r)`` for ``r = 1..r_max``.

    Pairs come from the ball of radius ``ceil(r_max / 2)`` around the
    identity (override with ``radius``), so distances up to ``r_max`` occur.
    """
    if r_max < 1:
        raise ConfigError("r_max must be at least 1")
    embedding.check_space(space)
    radius = _ball_radius(r_max) if radius is None else radius
    tree_ok = isinstance(space, FreeGroup) and space.standard and isinstance(embedding, TreeEmbedding)
    if strategy == "auto":
        strategy = TREE_CLOSED_FORM if tree_ok else EXACT_PAIRWISE
    if strategy == TREE_CLOSED_FORM:
        if not tree_ok:
            raise ConfigError("tree-closed-form needs a tree embedding of a standard free group")
        return _tree_closed_form(space, embedding, r_max, radius)
    ball = space.ball(radius)
    if strategy == EXACT_PAIRWISE:
        return _pairwise(space, embedding, ball.points, r_max, radius, threads=threads)
    if strategy == SAMPLED:
        return _sampled(space, embedding, ball.points, r_max, radius, seed, samples)
    raise ConfigError(f"unknown strategy {strategy!r}")


# -- estimation --------------------------------------------------------------------------

def default_window(profile: CompressionProfile) -> tuple[int, int]:
    hi = profile.r_max
    return (max(2, hi // 2), hi)


def asymptotic_compression(profile: CompressionProfile, window: tuple[int, int] | None = None) -> AsymptoticEstimate:
    """Least-squares slope of ``log rho*`` against ``log r`` on a tail window,
    plus the window minimum of ``log rho*(r) / log r`` as a liminf surrogate."""
    lo, hi = default_window(profile) if window is None else window
    if lo < 2:
        raise EstimationError("window must start at r >= 2")
    if hi > profile.r_max or lo > hi:
        raise EstimationError(f"window [{lo}, {hi}] not inside the grid 1..{profile.r_max}")
    sel = (profile.r_grid >= lo) & (profile.r_grid <= hi)
    if sel.sum() < 4:
        raise EstimationError(f"window [{lo}, {hi}] has fewer than 4 grid points")
    x = np.log(profile.r_grid[sel].astype(float))
    y = np.log(profile.rho_star[sel])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return AsymptoticEstimate(
        slope=float(slope),
        tail_min=float(np.min(y / x)),
        window=(int(lo), int(hi)),
        residual=float(np.sqrt(np.mean(resid**2))),
        strategy=profile.strategy,
    )


def lipschitz_fit(dX, dY, scale: float = 1.0, D: float | None = None) -> LipschitzFit:
    """Large-scale Lipschitz constants ``d_Y <= C d_X + D`` fitted on pairs.

    ``D`` defaults to the largest image distance among pairs with
    ``d_X <= scale``; ``C`` is then the least slope covering every pair.
    ``scale=0`` (and ``D=0``) gives the pointwise Lipschitz constant.
    """
    dX = np.asarray(dX, dtype=float).ravel()
    dY = np.asarray(dY, dtype=float).ravel()
    keep = dX > _TOL
    if dX.size == 0 or not keep.any():
        raise EstimationError("lipschitz_fit needs at least one pair at positive distance")
    if D is None:
        near = keep & (dX <= scale + _TOL)
        D = float(dY[near].max()) if near.any() else 0.0
    C = max(0.0, float(np.max((dY[keep] - D) / dX[keep])))
    viol = float(np.max(np.maximum(dY[keep] - (C * dX[keep] + D), 0.0)))
    return LipschitzFit(C=C, D=D, max_violation=viol, scale=scale)


def lipschitz_fit_by_range(dX, dY, extent, ranges, scale: float = 1.0, D: float | None = None):
    """Fitted ``C`` restricted to pairs whose extent is at most each range cap."""
    dX, dY, extent = (np.asarray(a, dtype=float).ravel() for a in (dX, dY, extent))
    out = []
    for cap in ranges:
        sel = extent <= cap
        out.append(lipschitz_fit(dX[sel], dY[sel], scale=scale, D=D).C)
    return np.array(out)


def growth_exponent(values, ranges) -> float:
    """Log-log slope of a positive sequence against its ranges."""
    v = np.asarray(values, dtype=float)
    r = np.asarray(ranges, dtype=float)
    ok = (v > 0) & (r > 0)
    if ok.sum() < 2:
        return 0.0
    return float(np.polyfit(np.log(r[ok]), np.log(v[ok]), 1)[0])


# -- composition and product checks ----------------------------------------------------

def _rho_function(dX: np.ndarray, dY: np.ndarray):
    """Exact compression at arbitrary real thresholds for a finite pair set."""
    order = np.argsort(dX)
    xs = dX[order]
    suffix = np.minimum.accumulate(dY[order][::-1])[::-1]

    def rho(t: float) -> float:
        if t <= 0:
            return 0.0
        k = np.searchsorted(xs, t - _TOL, side="left")
        return math.inf if k >= len(xs) else float(suffix[k])

    return rho


def _upper(M: np.ndarray) -> np.ndarray:
    return M[np.triu_indices(M.shape[0], k=1)]


def composition_check(
    f: EmbeddingSpec,
    g: EmbeddingSpec,
    space: GroupSpec,
    r_max: int,
    tol: float = 0.03,
    window: tuple[int, int] | None = None,
) -> CheckReport:
    """Check ``rho_{f.g}(r) >= rho_f(rho_g(r))`` pointwise and ``R_{f.g} >= R_f R_g - tol``.

    ``rho_f`` is taken over the pairs of ``g``-images of the ball, measured
    in ``f``'s source metric, so the pointwise inequality is exact on data.
    """
    h = Compose(f, g)
    h.check_space(space)
    radius = _ball_radius(r_max)
    pts = list(space.ball(radius).points)
    images = [g.embed(x) for x in pts]
    dZ = _upper(space.distance_matrix(pts))
    dX = _upper(f.source_distances(images))
    dY = _upper(h.image_distances(pts))
    prof_g = profile_from_distances(dZ, dX, r_max, radius=radius)
    prof_h = profile_from_distances(dZ, dY, r_max, radius=radius)
    if prof_g.r_max != prof_h.r_max:
        raise ConfigError("g and f.g profiles ended on different grids")
    win = default_window(prof_h) if window is None else window
    est_g = asymptotic_compression(prof_g, win)
    est_h = asymptotic_compression(prof_h, win)
    details = {
        "f": f.describe(),
        "g": g.describe(),
        "space": space.name,
        "radius": radius,
        "window": list(win),
        "R_g": est_g.slope,
        "R_fg": est_h.slope,
        "rho_g": prof_g.rho.tolist(),
        "rho_fg": prof_h.rho.tolist(),
    }
    notes = [_bias_note(radius)]
    # bounded rho_g: R_g = 0 and the product bound is vacuous
    if prof_g.rho[-1] <= prof_g.rho[win[0] - 1] + _TOL or est_g.slope <= _TOL:
        details["short_circuit"] = True
        notes.append("rho_g is bounded on the tested range (R_g = 0); nothing to prove")
        return CheckReport("composition", "pass", details, notes, tested_range=(1, prof_h.r_max))
    rho_f = _rho_function(dX, dY)
    bound = np.array([rho_f(t) for t in prof_g.rho])
    violations = [int(r) for r, a, b in zip(prof_h.r_grid, prof_h.rho, bound) if a < b - 1e-9]
    top = int(math.floor(dX.max() + _TOL))
    prof_f = profile_from_distances(dX, dY, top)
    est_f = asymptotic_compression(prof_f)
    product = est_f.slope * est_g.slope
    details.update(
        {
            "R_f": est_f.slope,
            "R_f_window": list(est_f.window),
            "rho_f_of_rho_g": bound.tolist(),
            "pointwise_violations": violations,
            "product_bound": product,
            "profiles_equal": bool(np.allclose(prof_h.rho, prof_g.rho, rtol=1e-12, atol=1e-12)),
        }
    )
    ok = not violations and est_h.slope >= product - tol
    return CheckReport("composition", verdict(ok), details, notes, tested_range=(1, prof_h.r_max))


def product_check(
    f: EmbeddingSpec,
    g: EmbeddingSpec,
    X: GroupSpec,
    Y: GroupSpec,
    r_max: int,
    tol: float = 0.05,
    window: tuple[int, int] | None = None,
) -> CheckReport:
    """Check ``rho_h(r) >= min(rho_f(r/2), rho_g(r/2)) / sqrt(2)`` for ``h = f + g``
    and ``R_h >= min(R_f, R_g) - tol``."""
    h = DirectSum(f, g)
    P = Product([X, Y])
    h.check_space(P)
    radius = _ball_radius(r_max)
    pts = list(P.ball(radius).points)
    prof_h = profile_from_distances(_upper(P.distance_matrix(pts)), _upper(h.image_distances(pts)), r_max, radius=radius)
    win = default_window(prof_h) if window is None else window
    est_h = asymptotic_compression(prof_h, win)
    factor = {}
    rhos = {}
    for name, emb, S in (("f", f, X), ("g", g, Y)):
        fp = list(S.ball(radius).points)
        if len(fp) < 2:
            rhos[name] = lambda t: math.inf
            factor[name] = None
            continue
        dS = _upper(S.distance_matrix(fp))
        dE = _upper(emb.image_distances(fp))
        rhos[name] = _rho_function(dS, dE)
        prof = profile_from_distances(dS, dE, r_max, radius=radius)
        factor[name] = asymptotic_compression(prof, win if prof.r_max >= win[1] else None).slope
    bound = np.array([min(rhos["f"](r / 2), rhos["g"](r / 2)) / math.sqrt(2) for r in prof_h.r_grid])
    violations = [int(r) for r, a, b in zip(prof_h.r_grid, prof_h.rho, bound) if a < b - 1e-9]
    slopes = [s for s in factor.values() if s is not None]
    floor = min(slopes) if slopes else math.nan
    ok = not violations and (not slopes or est_h.slope >= floor - tol)
    details = {
        "f": f.describe(),
        "g": g.describe(),
        "space": P.name,
        "radius": radius,
        "window": list(win),
        "R_h": est_h.slope,
        "R_f": factor["f"],
        "R_g": factor["g"],
        "min_rule": floor,
        "rho_h": prof_h.rho.tolist(),
        "lower_bound": bound.tolist(),
        "pointwise_violations": violations,
    }
    return CheckReport("product", verdict(ok), details, [_bias_note(radius)], tested_range=(1, prof_h.r_max))


def classify_embedding(space: GroupSpec, embedding: EmbeddingSpec, r_max: int, **kw) -> dict:
    """Profile plus tail estimate, for reports."""
    prof = compression_profile(space, embedding, r_max, **kw)
    return {"profile": prof, "estimate": asymptotic_compression(prof)}
