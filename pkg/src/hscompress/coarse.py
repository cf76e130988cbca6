"""Coarse-geometry checks on finite samples: uniform embeddings, quasi-geodesics,
the subchain extraction, and quasi-isometry constants.

"Proper" and "unbounded" cannot be decided from finite data, so verdicts
are pass / fail / inconclusive and carry the range they were tested on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .compression import growth_exponent, lipschitz_fit, profile_from_distances
from .errors import DomainError, EstimationError, InputError
from .reports import FAIL, INCONCLUSIVE, PASS, CheckReport, verdict

GROWTH_THRESHOLD = 0.25
GROWTH_RATIO = 1.25
_TOL = 1e-9


def tail_growth(values, ranges) -> float:
    """Log-log slope of fitted constants over the upper half of the ranges.

    Early ranges are dropped because a bounded constant still climbs while
    it converges.
    """
    r = np.asarray(ranges, dtype=float)
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        return math.inf
    keep = r >= r.max() / 2 - _TOL
    return growth_exponent(v[keep], r[keep])


def grows(values, ranges) -> bool:
    """Growth needs both a tail slope of at least ``GROWTH_THRESHOLD`` and a
    tail increase by at least ``GROWTH_RATIO``; slowly converging constants
    on small samples fail the second test."""
    r = np.asarray(ranges, dtype=float)
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        return True
    tail = v[r >= r.max() / 2 - _TOL]
    if tail[0] <= 0:
        return bool(tail[-1] > 0)
    return tail_growth(v, r) >= GROWTH_THRESHOLD and tail[-1] >= GROWTH_RATIO * tail[0]


@dataclass
class MapSample:
    """A map ``f: X -> Y`` sampled on finitely many points.

    ``dX[i, j]`` is the source distance of points ``i, j`` and ``dY[i, j]``
    the distance of their images.  ``extent[i]`` measures how far point
    ``i`` lies from the base point and drives range-growth diagnostics.
    """

    name: str
    dX: np.ndarray
    dY: np.ndarray
    extent: np.ndarray | None = None
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.dX = np.asarray(self.dX, dtype=float)
        self.dY = np.asarray(self.dY, dtype=float)
        if self.dX.shape != self.dY.shape or self.dX.ndim != 2 or self.dX.shape[0] != self.dX.shape[1]:
            raise InputError("source and image distance matrices must be square and of equal shape")
        if self.extent is None:
            self.extent = self.dX[0].copy() if len(self) else np.zeros(0)
        self.extent = np.asarray(self.extent, dtype=float)

    def __len__(self):
        return self.dX.shape[0]

    @classmethod
    def from_map(cls, name, points, fn: Callable, dist_X: Callable, dist_Y: Callable, extent=None):
        pts = list(points)
        imgs = [fn(p) for p in pts]
        n = len(pts)
        dX = np.zeros((n, n))
        dY = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                dX[i, j] = dX[j, i] = dist_X(pts[i], pts[j])
                dY[i, j] = dY[j, i] = dist_Y(imgs[i], imgs[j])
        return cls(name, dX, dY, extent, labels=pts)

    def pairs(self, cap: float | None = None):
        """Upper-triangle ``(dX, dY, extent)`` arrays, optionally restricted to points with extent <= cap."""
        idx = np.arange(len(self)) if cap is None else np.flatnonzero(self.extent <= cap + _TOL)
        sub_x = self.dX[np.ix_(idx, idx)]
        sub_y = self.dY[np.ix_(idx, idx)]
        iu = np.triu_indices(len(idx), k=1)
        ext = np.maximum(self.extent[idx][:, None], self.extent[idx][None, :])[iu]
        return sub_x[iu], sub_y[iu], ext

    def default_ranges(self, count: int = 5) -> list[float]:
        top = float(self.extent.max())
        caps = [top * (k + 1) / count for k in range(count)]
        return [c for c in caps if np.count_nonzero(self.extent <= c + _TOL) >= 2]


@dataclass(frozen=True)
class QGWitness:
    lam: float
    delta: float
    passed: bool
    connected: bool
    components: int
    worst_ratio: float
    failures: list
    chains: dict

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "delta": self.delta,
            "verdict": verdict(self.passed),
            "connected": self.connected,
            "components": self.components,
            "worst_ratio": self.worst_ratio,
            "failures": self.failures,
            "chains": {f"{i},{j}": c for (i, j), c in self.chains.items()},
        }


@dataclass(frozen=True)
class Subchain:
    indices: list
    m: int
    path: list
    gaps: list
    terminal_gap: float


@dataclass(frozen=True)
class QIConstants:
    C: float
    D: float
    K: float | None = None
    delta_prime: float | None = None
    lambda_prime: float | None = None


# -- uniform embeddings -------------------------------------------------------------

def check_uniform_embedding(sample: MapSample, r_max: int) -> CheckReport:
    """Properness surrogate: the lower profile is positive and still growing
    over the top half of ``1..r_max``; the upper profile is finite everywhere."""
    dX, dY, _ = sample.pairs()
    reach = float(dX.max()) if dX.size else 0.0
    tested = (1, r_max)
    if reach < r_max:
        return CheckReport(
            "uniform-embedding",
            INCONCLUSIVE,
            {"sample": sample.name, "largest_distance": reach, "r_max": r_max},
            [f"sample only reaches distance {reach:g} < r_max = {r_max}"],
            tested,
        )
    prof = profile_from_distances(dX, dY, r_max)
    rho, rho_plus = prof.rho, prof.rho_plus
    half = max(1, math.ceil(r_max / 2))
    growing = bool(rho[-1] > 0 and rho[-1] > rho[half - 1] + _TOL)
    finite = bool(np.all(np.isfinite(rho_plus)))
    details = {
        "sample": sample.name,
        "rho_minus": rho.tolist(),
        "rho_plus": rho_plus.tolist(),
        "lower_growing": growing,
        "upper_finite": finite,
    }
    notes = ["properness is judged on the tested range only"]
    return CheckReport("uniform-embedding", verdict(growing and finite), details, notes, tested)


def classify_map(sample: MapSample, ranges: Sequence[float] | None = None, r_max: int | None = None, scale: float = 1.0) -> dict:
    """Uniform-embedding, large-scale-Lipschitz and Lipschitz verdicts.

    Growth of a fitted constant with the range is judged by :func:`grows`.
    """
    ranges = sample.default_ranges() if ranges is None else list(ranges)
    if r_max is None:
        dX, _, _ = sample.pairs()
        r_max = max(1, int(math.floor(dX.max() / 2)))
    ue = check_uniform_embedding(sample, r_max)
    ls, lip = [], []
    for cap in ranges:
        dX, dY, _ = sample.pairs(cap)
        ls.append(lipschitz_fit(dX, dY, scale=scale).C)
        lip.append(lipschitz_fit(dX, dY, scale=0.0, D=0.0).C)
    ls_growth = tail_growth(ls, ranges)
    lip_growth = tail_growth(lip, ranges)
    return {
        "uniform_embedding": ue.verdict,
        "large_scale_lipschitz": verdict(not grows(ls, ranges)),
        "lipschitz": verdict(not grows(lip, ranges)),
        "ranges": list(ranges),
        "large_scale_C": ls,
        "large_scale_growth": ls_growth,
        "pointwise_C": lip,
        "pointwise_growth": lip_growth,
        "ue_report": ue.to_dict(),
    }


# -- quasi-geodesics ---------------------------------------------------------------

def _path(pred: np.ndarray, i: int, j: int) -> list:
    out = [j]
    while out[-1] != i:
        p = pred[out[-1]]
        if p < 0:
            return []
        out.append(int(p))
    return out[::-1]


def check_quasi_geodesic(dist, lam: float, delta: float, pairs=None, witness_limit: int = 5) -> QGWitness:
    """Shortest weighted ``delta``-step chains versus ``lam * d(x, y)``."""
    D = np.asarray(dist, dtype=float)
    if lam < 1 or delta <= 0:
        raise DomainError("need lambda >= 1 and delta > 0")
    n = D.shape[0]
    off = ~np.eye(n, dtype=bool)
    if np.any(D[off] <= 0):
        raise InputError("points must be distinct")
    adj = np.where((D <= delta + _TOL) & off, D, 0.0)
    graph = csr_matrix(adj)
    ncomp, labels = connected_components(graph, directed=False)
    L, pred = dijkstra(graph, directed=False, return_predecessors=True)
    if pairs is None:
        iu = np.triu_indices(n, k=1)
        pairs = list(zip(iu[0].tolist(), iu[1].tolist()))
    failures, worst = [], 0.0
    worst_pair = None
    for i, j in pairs:
        ratio = L[i, j] / D[i, j]
        if ratio > worst:
            worst, worst_pair = ratio, (i, j)
        if not L[i, j] <= lam * D[i, j] + _TOL:
            failures.append({"pair": [int(i), int(j)], "d": float(D[i, j]), "chain_length": float(L[i, j])})
    chains = {}
    if worst_pair is not None and math.isfinite(worst):
        chains[worst_pair] = _path(pred[worst_pair[0]], *worst_pair)
    for f in failures[:witness_limit]:
        i, j = f["pair"]
        if math.isfinite(f["chain_length"]):
            chains[(i, j)] = _path(pred[i], i, j)
    if ncomp > 1:
        # report the gaps that split the graph: nearest points across components
        gaps = []
        for c in range(ncomp - 1):
            a = labels == c
            b = labels > c
            gaps.append(float(D[np.ix_(a, b)].min()))
        failures = [{"components": int(ncomp), "gaps": gaps}] + failures
    return QGWitness(
        lam=lam,
        delta=delta,
        passed=not failures,
        connected=ncomp == 1,
        components=int(ncomp),
        worst_ratio=float(worst),
        failures=failures,
        chains=chains,
    )


def extract_subchain(chain: Sequence, delta: float, metric: Callable | None = None) -> Subchain:
    """Greedy subsequence: from the current point take the first later point at
    distance at least ``delta / 2``; stop when there is none."""
    metric = metric or (lambda a, b: abs(a - b))
    pts = list(chain)
    if not pts:
        raise InputError("empty chain")
    for a, b in zip(pts, pts[1:]):
        if metric(a, b) > delta + _TOL:
            raise DomainError(f"chain step {metric(a, b):g} exceeds delta = {delta:g}")
    idx = [0]
    while True:
        cur = idx[-1]
        nxt = next((k for k in range(cur + 1, len(pts)) if metric(pts[cur], pts[k]) >= delta / 2), None)
        if nxt is None:
            break
        idx.append(nxt)
    path = idx + ([len(pts) - 1] if idx[-1] != len(pts) - 1 else [])
    gaps = [float(metric(pts[a], pts[b])) for a, b in zip(idx, idx[1:])]
    return Subchain(
        indices=idx,
        m=len(idx) - 1,
        path=path,
        gaps=gaps,
        terminal_gap=float(metric(pts[idx[-1]], pts[-1])),
    )


def rho_plus_function(dX, dY) -> Callable[[float], float]:
    """Exact ``rho_plus(r) = max d_Y`` over pairs with ``d_X <= r``."""
    dX = np.asarray(dX, dtype=float).ravel()
    dY = np.asarray(dY, dtype=float).ravel()
    order = np.argsort(dX)
    xs = dX[order]
    prefix = np.maximum.accumulate(dY[order])

    def rho_plus(r: float) -> float:
        k = np.searchsorted(xs, r + _TOL, side="right")
        return 0.0 if k == 0 else float(prefix[k - 1])

    return rho_plus


def lslip_from_rho_plus(rho_plus, lam: float, delta: float):
    """Constants ``C = 2 lam rho_plus(3 delta / 2) / delta`` and ``D = rho_plus(delta / 2)``."""
    from .compression import LipschitzFit

    if lam < 1 or delta <= 0:
        raise DomainError("need lambda >= 1 and delta > 0")
    try:
        hi = rho_plus(1.5 * delta)
        lo = rho_plus(0.5 * delta)
    except (IndexError, EstimationError) as e:
        raise EstimationError(f"rho_plus undefined at the required scales: {e}") from e
    if hi is None or lo is None or not (math.isfinite(hi) and math.isfinite(lo)):
        raise EstimationError("rho_plus undefined at the required scales")
    return LipschitzFit(C=2 * lam * hi / delta, D=float(lo), max_violation=0.0, scale=delta)


def coarse_to_qi_constants(C: float, D: float, lam: float, delta: float, K: float | None = None) -> QIConstants:
    """Quasi-geodesic constants for the image of a quasi-isometry."""
    if C <= 0 or D < 0 or lam < 1 or delta <= 0:
        raise DomainError("need C > 0, D >= 0, lambda >= 1, delta > 0")
    dp = 3 * delta * C / 2 + D
    lp = 2 * C * (D + dp) * lam / delta + 1
    return QIConstants(C=C, D=D, K=K, delta_prime=dp, lambda_prime=lp)


def equivalence_constants(Cf: float, Df: float, Cg: float, Dg: float, K: float) -> tuple[float, float]:
    """Quasi-isometry constants for a coarse equivalence ``f`` with inverse ``g``.

    From ``d_X(x, x') <= d_X(gf x, gf x') + 2K <= C_g d_Y(f x, f x') + D_g + 2K``.
    """
    if Cg <= 0:
        raise DomainError("C_g must be positive")
    return max(Cf, Cg), max(Df, (2 * K + Dg) / Cg)


# -- quasi-isometries -------------------------------------------------------------

def qi_violation(dX, dY, C: float, D: float) -> float:
    upper = dY - (C * dX + D)
    lower = (dX / C - D) - dY
    return float(max(np.max(upper, initial=0.0), np.max(lower, initial=0.0), 0.0))


def minimal_D(dX, dY, C: float) -> float:
    return float(max(np.max(dY - C * dX, initial=0.0), np.max(dX / C - dY, initial=0.0), 0.0))


def fit_qi(dX, dY, D_max: float, per_octave: int = 16, C_cap: float = 2.0**20):
    """Smallest grid ``C = 2**(j / per_octave)`` admitting some ``D <= D_max``, then its minimal ``D``."""
    dX = np.asarray(dX, dtype=float)
    dY = np.asarray(dY, dtype=float)
    if dX.size == 0:
        raise EstimationError("empty sample")
    j = 0
    while True:
        C = 2.0 ** (j / per_octave)
        if C > C_cap:
            return None
        D = minimal_D(dX, dY, C)
        if D <= D_max + _TOL:
            return C, D
        j += 1


def default_D_max(dX, dY, scale: float = 1.0) -> float:
    """Twice the local scale of the map in both directions (at least 1)."""
    near_x = dX <= scale + _TOL
    near_y = dY <= scale + _TOL
    a = float(dY[near_x].max()) if near_x.any() else 0.0
    b = float(dX[near_y].max()) if near_y.any() else 0.0
    return 2 * max(1.0, a, b)


def check_quasi_isometry(
    sample: MapSample,
    K: float | None = None,
    C: float | None = None,
    D: float | None = None,
    D_max: float | None = None,
    ranges: Sequence[float] | None = None,
    dense_dist: np.ndarray | None = None,
) -> CheckReport:
    """Two-sided affine comparison of source and image distances.

    With ``C`` and ``D`` given, verify them on every pair.  Otherwise fit
    ``(C, D)`` on nested ranges; the verdict fails when no ``C`` works or the
    fitted ``C`` grows with the range.  ``dense_dist[t, i]`` (target point
    ``t`` to image ``i``) adds a ``K``-density check.
    """
    dX, dY, _ = sample.pairs()
    if dX.size == 0:
        raise EstimationError("empty sample")
    details: dict = {"sample": sample.name}
    notes = ["constants are fitted on the sampled pairs only"]
    ok = True
    if C is not None:
        D = 0.0 if D is None else D
        viol = qi_violation(dX, dY, C, D)
        details.update({"C": C, "D": D, "max_violation": viol, "mode": "verify"})
        ok = viol <= 1e-9
    else:
        ranges = sample.default_ranges() if ranges is None else list(ranges)
        D_max = default_D_max(dX, dY) if D_max is None else D_max
        fits = []
        for cap in ranges:
            x, y, _ = sample.pairs(cap)
            fits.append(fit_qi(x, y, D_max) if x.size else None)
        feasible = all(f is not None for f in fits)
        Cs = [f[0] if f else math.inf for f in fits]
        growth = tail_growth(Cs, ranges) if feasible else math.inf
        details.update(
            {
                "mode": "fit",
                "D_max": D_max,
                "ranges": ranges,
                "C_by_range": Cs,
                "D_by_range": [f[1] if f else math.inf for f in fits],
                "C_growth": growth,
                "feasible": feasible,
            }
        )
        if feasible:
            details["C"], details["D"] = fits[-1]
        ok = feasible and not grows(Cs, ranges)
        if not feasible:
            notes.append(f"no C up to 2^20 satisfies both inequalities with D <= {D_max:g}")
    if dense_dist is not None:
        if K is None:
            raise InputError("K is required with a density target")
        gap = float(np.asarray(dense_dist, dtype=float).min(axis=1).max())
        details.update({"K": K, "density_gap": gap})
        ok = ok and gap <= K + _TOL
    tested = (0.0, float(sample.extent.max()))
    return CheckReport("quasi-isometry", PASS if ok else FAIL, details, notes, tested)


def image_quasi_geodesic(sample: MapSample, consts: QIConstants) -> QGWitness:
    """Check the image of the sample is quasi-geodesic with ``(lambda', delta')``."""
    return check_quasi_geodesic(sample.dY, consts.lambda_prime, consts.delta_prime)
