"""Schoenberg kernels on finite balls, the Schur test and finite-width approximants.

Operators on the group are modelled by dense matrices on a ball ``B(R)``;
every operator norm here is the spectral norm of such a matrix.
"""
from __future__ import annotations

import csv
import io
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .compression import _rho_function
from .embeddings import EmbeddingSpec
from .errors import CapacityError, ConfigError, DomainError, HypothesisError, InputError
from .reports import CheckReport, verdict
from .spaces import Ball, GroupSpec

DEFAULT_EIG_CAP = 4000
DESK_NOTE = "operators are modelled by finite matrices on a ball; norms are finite-dimensional spectral norms"


def eig_cap() -> int:
    return int(os.environ.get("HSCOMPRESS_MAX_EIG", DEFAULT_EIG_CAP))


@dataclass
class KernelMatrix:
    """A kernel restricted to the points of a ball.

    ``dist`` holds the word metric and ``sq_image`` the squared image
    distances the kernel was built from (``None`` for hand-built kernels).
    """

    points: tuple
    entries: np.ndarray
    dist: np.ndarray
    params: dict = field(default_factory=dict)
    sq_image: np.ndarray | None = None
    space: GroupSpec | None = None

    def __post_init__(self):
        e = self.entries
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape != self.dist.shape:
            raise InputError("kernel entries and distances must be square of equal shape")

    def __len__(self):
        return self.entries.shape[0]

    @property
    def normalized(self) -> bool:
        return bool(np.all(np.diag(self.entries) == 1.0))

    @property
    def width(self) -> float:
        nz = self.entries != 0
        return float(self.dist[nz].max()) if nz.any() else 0.0

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    def truncate(self, n: float) -> "KernelMatrix":
        """The kernel ``k_n``: entries kept only where ``d(s, t) > n``."""
        e = np.where(self.dist > n, self.entries, 0.0)
        return KernelMatrix(self.points, e, self.dist, {**self.params, "truncation": n}, self.sq_image, self.space)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "value"])
        iu, ju = np.triu_indices(len(self))
        for i, j in zip(iu, ju):
            w.writerow([int(i), int(j), repr(float(self.entries[i, j]))])
        return buf.getvalue()


@dataclass(frozen=True)
class SchurReport:
    max_row_sum: float
    analytic_bound: float
    m: int
    r0: int
    eps: float
    kappa: float
    truncation: float
    sphere_contributions: tuple
    spectral_norm: float
    hypothesis_vacuous: bool
    bound_applicable: bool
    notes: tuple = ()

    @property
    def passed(self) -> bool:
        return self.max_row_sum <= self.analytic_bound * (1 + 1e-12) and self.spectral_norm <= self.max_row_sum * (1 + 1e-9) + 1e-12

    def to_dict(self) -> dict:
        return {
            "max_row_sum": self.max_row_sum,
            "analytic_bound": self.analytic_bound,
            "m": self.m,
            "r0": self.r0,
            "eps": self.eps,
            "kappa": self.kappa,
            "truncation": self.truncation,
            "sphere_contributions": list(self.sphere_contributions),
            "spectral_norm": self.spectral_norm,
            "hypothesis_vacuous": self.hypothesis_vacuous,
            "bound_applicable": self.bound_applicable,
            "verdict": verdict(self.passed),
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class WidthApproxReport:
    w: int
    sup_error: float
    min_eig_u: float
    min_eig_approx: float
    norm_V: float
    norm_diff: float
    width_approx: float
    clipped: float
    converged: bool

    @property
    def chain_bound(self) -> float:
        return self.norm_diff * (2 * self.norm_V + self.norm_diff)

    @property
    def passed(self) -> bool:
        return (
            self.sup_error <= self.chain_bound + 1e-10
            and self.width_approx <= 2 * self.w
            and self.min_eig_approx >= -1e-8
        )

    def to_dict(self) -> dict:
        return {
            "w": self.w,
            "sup_error": self.sup_error,
            "chain_bound": self.chain_bound,
            "min_eig_u": self.min_eig_u,
            "min_eig_approx": self.min_eig_approx,
            "norm_V": self.norm_V,
            "norm_diff": self.norm_diff,
            "width_approx": self.width_approx,
            "clipped": self.clipped,
            "converged": self.converged,
            "verdict": verdict(self.passed),
        }


def _check_size(n: int) -> None:
    cap = eig_cap()
    if n > cap:
        raise CapacityError(f"kernel on {n} points exceeds the eigensolver cap of {cap} (HSCOMPRESS_MAX_EIG)", predicted=n, cap=cap)


def _points_of(ball) -> list:
    return list(ball.points if isinstance(ball, Ball) else ball)


def schoenberg_kernel(embedding: EmbeddingSpec, k: float, ball, space: GroupSpec) -> KernelMatrix:
    """``u_k(s, t) = exp(-|f(s) - f(t)|^2 / k)`` on the points of ``ball``."""
    if not k > 0:
        raise DomainError("k must be positive")
    embedding.check_space(space)
    pts = _points_of(ball)
    _check_size(len(pts))
    sq = embedding.image_distances(pts) ** 2
    sq = (sq + sq.T) / 2
    np.fill_diagonal(sq, 0.0)
    entries = np.exp(-sq / k)
    dist = np.asarray(space.distance_matrix(pts), dtype=float)
    return KernelMatrix(tuple(pts), entries, dist, {"k": k, "embedding": embedding.describe()}, sq, space)


def kappa_kernel(embedding: EmbeddingSpec, kappa: float, ball, space: GroupSpec) -> KernelMatrix:
    """``u(s, t) = exp(-kappa |f(s) - f(t)|^2)``, the same family with ``k = 1 / kappa``."""
    if not kappa > 0:
        raise DomainError("kappa must be positive")
    km = schoenberg_kernel(embedding, 1.0 / kappa, ball, space)
    km.params = {"kappa": kappa, "embedding": embedding.describe()}
    return km


def _symmetric(M: np.ndarray) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.array_equal(M, M.T):
        raise DomainError("matrix is not exactly symmetric")


def psd_check(matrix, tol: float = 1e-8) -> tuple[float, bool]:
    """Smallest eigenvalue of a symmetric matrix and whether it is ``>= -tol``."""
    M = matrix.entries if isinstance(matrix, KernelMatrix) else np.asarray(matrix, dtype=float)
    _symmetric(M)
    _check_size(M.shape[0])
    lo = float(linalg.eigvalsh(M, subset_by_index=[0, 0])[0])
    return lo, lo >= -tol


def spectral_norm(M: np.ndarray) -> float:
    if not M.any():
        return 0.0
    ev = linalg.eigvalsh(M)
    return float(max(abs(ev[0]), abs(ev[-1])))


# -- Schur test ----------------------------------------------------------------------

def smallest_cutoff(card_S: int, kappa: float, eps: float, r0: int = 0, m_cap: int = 10**7) -> int | None:
    """Smallest ``m >= r0`` with ``card_S < exp(kappa * m**eps)``, or ``None``."""
    if eps <= 0:
        return None if card_S >= math.exp(kappa) else max(r0, 0)
    need = (math.log(card_S) / kappa) ** (1 / eps)
    m = max(int(math.floor(need)) - 1, r0, 0)  # condition is monotone in m
    while card_S >= math.exp(kappa * m**eps):
        m += 1
        if m > m_cap:
            return None
    return m if m <= m_cap else None


def _sphere_size(space, n: int) -> int:
    if hasattr(space, "sphere_size"):
        return int(space.sphere_size(n))
    return int(space.card_S) ** n  # crude bound when no growth formula is known


def analytic_schur_bound(space, card_S: int, kappa: float, eps: float, m: int, truncation: float = -1) -> float:
    """``sum_{t < n <= m} sigma(n) + sum_{n > max(m, t)} q**n`` with ``q = card_S exp(-kappa m**eps)``."""
    q = card_S * math.exp(-kappa * m**eps)
    if q >= 1:
        return math.inf
    start = int(math.floor(truncation)) + 1
    head = sum(_sphere_size(space, n) for n in range(max(start, 0), m + 1))
    first = max(m + 1, start)
    tail = q**first / (1 - q)
    return float(head + tail)


def auto_r0(sq_image: np.ndarray, dist: np.ndarray, eps: float) -> tuple[int, bool]:
    """Smallest integer ``r0`` such that ``rho(r) >= r**((1 + eps)/2)`` for every
    realized ``r >= r0``; ``vacuous`` is set when only ``r0 = diameter + 1`` works."""
    iu = np.triu_indices(dist.shape[0], k=1)
    rho = _rho_function(dist[iu], np.sqrt(sq_image[iu]))
    top = int(math.floor(dist.max()))
    r0 = top + 1
    for r in range(top, 0, -1):
        if rho(r) >= r ** ((1 + eps) / 2) - 1e-12:
            r0 = r
        else:
            break
    return r0, r0 > top


def schur_analysis(
    matrix: KernelMatrix,
    truncation: float = -1,
    eps: float = 0.5,
    kappa: float | None = None,
    r0: int | None = None,
) -> SchurReport:
    """Exact row sums of ``k_n`` against the analytic spherical-growth bound,
    plus the Schur conclusion ``|Op(k_n)| <= max row sum``."""
    if kappa is None:
        kappa = matrix.params.get("kappa")
        if kappa is None:
            raise ConfigError("kappa is required")
    if not matrix.normalized:
        raise DomainError("Schur analysis needs a normalized kernel")
    if matrix.space is None:
        raise ConfigError("kernel carries no space; cannot count spheres")
    notes = [DESK_NOTE]
    vacuous = False
    if matrix.sq_image is not None:
        if r0 is None:
            r0, vacuous = auto_r0(matrix.sq_image, matrix.dist, eps)
            if vacuous:
                notes.append("growth hypothesis holds at no realized distance; it is vacuous on this ball")
        else:
            iu = np.triu_indices(len(matrix), k=1)
            rho = _rho_function(matrix.dist[iu], np.sqrt(matrix.sq_image[iu]))
            for r in range(max(r0, 1), int(math.floor(matrix.diameter)) + 1):
                if rho(r) < r ** ((1 + eps) / 2) - 1e-12:
                    raise HypothesisError(f"rho({r}) = {rho(r):.6g} < r^((1+eps)/2)", r=r)
    elif r0 is None:
        r0 = 0
    card_S = matrix.space.card_S
    m = smallest_cutoff(card_S, kappa, eps, r0)
    k = matrix.truncate(truncation)
    rows = k.entries.sum(axis=1)
    max_row = float(rows.max())
    if m is None:
        warnings.warn("card(S) >= exp(kappa m^eps) for every admissible m; analytic bound inapplicable")
        notes.append("analytic bound inapplicable")
        bound, m_out, applicable = math.inf, -1, False
    else:
        bound, m_out, applicable = analytic_schur_bound(matrix.space, card_S, kappa, eps, m, truncation), m, True
    i = int(np.argmax(rows))
    contrib = []
    for n in range(int(math.floor(matrix.diameter)) + 1):
        contrib.append(float(k.entries[i][matrix.dist[i] == n].sum()))
    return SchurReport(
        max_row_sum=max_row,
        analytic_bound=bound,
        m=m_out,
        r0=int(r0),
        eps=eps,
        kappa=kappa,
        truncation=truncation,
        sphere_contributions=tuple(contrib),
        spectral_norm=spectral_norm(k.entries),
        hypothesis_vacuous=vacuous,
        bound_applicable=applicable,
        notes=tuple(notes),
    )


def schur_suite(matrix: KernelMatrix, eps: float = 0.5, kappa: float | None = None, r0: int | None = None):
    """Schur reports for ``k_n`` at every truncation ``n = -1, 0, ..., diameter``."""
    top = int(math.floor(matrix.diameter))
    return [schur_analysis(matrix, n, eps, kappa, r0) for n in range(-1, top + 1)]


# -- finite-width approximation ------------------------------------------------------

def psd_sqrt(M: np.ndarray, tol: float = 1e-8) -> tuple[np.ndarray, float, np.ndarray]:
    """Positive square root, clipping negative eigenvalues no larger than ``tol``."""
    _symmetric(M)
    ev, Q = linalg.eigh(M)
    if ev[0] < -tol:
        raise DomainError(f"matrix is not PSD: smallest eigenvalue {ev[0]:.3e}")
    clipped = float(max(0.0, -ev[0]))
    root = np.sqrt(np.clip(ev, 0.0, None))
    V = (Q * root) @ Q.T
    return (V + V.T) / 2, clipped, ev


def finite_width_approx(matrix: KernelMatrix, w: int, tol: float = 1e-8, conv_tol: float = 1e-2, _sqrt=None) -> WidthApproxReport:
    """Approximate ``u`` by ``u_hat = W^T W`` with ``W`` the width-``w`` truncation of ``sqrt(u)``."""
    if w < 0:
        raise DomainError("width must be non-negative")
    _check_size(len(matrix))
    V, clipped, ev = _sqrt if _sqrt is not None else psd_sqrt(matrix.entries, tol)
    W = np.where(matrix.dist <= w, V, 0.0)
    approx = W.T @ W
    diff = V - W
    sup_error = float(np.abs(matrix.entries - approx).max())
    nz = approx != 0
    width = float(matrix.dist[nz].max()) if nz.any() else 0.0
    approx_sym = (approx + approx.T) / 2
    return WidthApproxReport(
        w=int(w),
        sup_error=sup_error,
        min_eig_u=float(ev[0]),
        min_eig_approx=float(linalg.eigvalsh(approx_sym, subset_by_index=[0, 0])[0]),
        norm_V=float(math.sqrt(max(ev[-1], 0.0))),
        norm_diff=spectral_norm((diff + diff.T) / 2),
        width_approx=width,
        clipped=clipped,
        converged=sup_error <= conv_tol,
    )


def width_sweep(matrix: KernelMatrix, widths, tol: float = 1e-8, conv_tol: float = 1e-2):
    root = psd_sqrt(matrix.entries, tol)
    return [finite_width_approx(matrix, w, tol, conv_tol, _sqrt=root) for w in widths]


def approx_kernel(matrix: KernelMatrix, w: int, tol: float = 1e-8) -> KernelMatrix:
    V, _, _ = psd_sqrt(matrix.entries, tol)
    W = np.where(matrix.dist <= w, V, 0.0)
    A = W.T @ W
    return KernelMatrix(matrix.points, (A + A.T) / 2, matrix.dist, {**matrix.params, "w": w}, None, matrix.space)


# -- convergence and support ---------------------------------------------------------

def convergence_support_check(kernels, strip: float, width_cap: float | None = None, conv_tol: float = 1e-2) -> CheckReport:
    """``sup_{d <= strip} |1 - u_k|`` must decrease toward 0 along the sequence,
    and every kernel must have width at most ``width_cap``.

    With no cap, a kernel whose support reaches the ball diameter counts as
    unbounded on the ball.
    """
    kernels = list(kernels)
    if not kernels:
        raise InputError("empty kernel sequence")
    sups, widths = [], []
    for km in kernels:
        near = km.dist <= strip
        sups.append(float(np.abs(1.0 - km.entries[near]).max()))
        widths.append(km.width)
    decreasing = all(b < a or a == 0 for a, b in zip(sups, sups[1:]))
    converges = decreasing and sups[-1] <= max(conv_tol, 0.0)
    diam = kernels[0].diameter
    if width_cap is None:
        support = all(w < diam for w in widths)
    else:
        support = all(w <= width_cap for w in widths)
    details = {
        "strip": strip,
        "sup_deviation": sups,
        "decreasing": decreasing,
        "converges": converges,
        "widths": widths,
        "width_cap": width_cap if width_cap is not None else f"< diameter {diam:g}",
        "support": support,
    }
    return CheckReport("convergence-support", verdict(converges and support), details, [DESK_NOTE], tested_range=(0, diam))
