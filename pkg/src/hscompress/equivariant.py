"""The left action of a free group on its edge space and the tree cocycle.

Edges are oriented, so translation acts by signed permutations; with
unsigned coordinates a backtracking path would double-count edges and the
cocycle identity would fail.

``b(s)`` is the indicator of the edges on the geodesic from ``s`` to the
identity.  Its compression gives a lower estimate for the equivariant
compression of the free group; the matching upper bound 1/2 is a theorem
about non-amenable groups that nothing here tries to verify.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .compression import TREE_CLOSED_FORM, asymptotic_compression, compression_profile
from .embeddings import Edge, HilbertVector, TreeEmbedding
from .errors import ConfigError, DomainError
from .spaces import FreeGroup, free_sphere_size, reduce_word

EXHAUSTIVE_SPHERE = 8


def translate(s: str, w: str, rank: int | None = None) -> str:
    return reduce_word(s + w, rank)


def act_edge(s: str, e, rank: int | None = None) -> tuple[Edge, int]:
    """Translate the oriented edge ``e.u -> e.v`` by ``s``.

    Keys are stored parent-first; the sign is -1 when the translated edge
    points back toward the identity.
    """
    if not isinstance(e, Edge):
        raise DomainError(f"{e!r} is not an edge key")
    a, b = translate(s, e.u, rank), translate(s, e.v, rank)
    key = Edge.of(a, b)
    return key, (1 if key.u == a else -1)


def act(s: str, v: HilbertVector, rank: int | None = None) -> HilbertVector:
    """Linear part ``pi_s``: a signed permutation of oriented edge coordinates."""
    if v.intervals:
        raise DomainError("the edge action is defined on edge coordinates only")
    s = reduce_word(s, rank)
    out = {}
    for e, c in v.coeffs.items():
        key, sign = act_edge(s, e, rank)
        out[key] = sign * c
    return HilbertVector(out)


def tree_cocycle(s: str) -> HilbertVector:
    """``b(s)``: the oriented edges of the path from the identity to ``s``, each with weight 1.

    Every edge on that path points away from the identity, so in
    parent-first keys all coefficients are +1 and this is the tree map.
    """
    return TreeEmbedding(0.0).embed(s)


def affine_act(s: str, v: HilbertVector, cocycle: Callable = tree_cocycle, rank: int | None = None) -> HilbertVector:
    return act(s, v, rank) + cocycle(reduce_word(s, rank))


def cocycle_residual(s: str, t: str, cocycle: Callable = tree_cocycle, rank: int | None = None) -> float:
    """``|b(st) - pi_s b(t) - b(s)|``."""
    diff = cocycle(reduce_word(s + t, rank)) - act(s, cocycle(t), rank) - cocycle(s)
    return diff.norm()


def verify_cocycle(pairs: Iterable[tuple[str, str]], cocycle: Callable = tree_cocycle, rank: int | None = None) -> float:
    return max((cocycle_residual(s, t, cocycle, rank) for s, t in pairs), default=0.0)


def random_words(rng: np.random.Generator, rank: int, radius: int, count: int) -> list[str]:
    """Reduced words drawn uniformly from the ball of the given radius."""
    sizes = np.array([free_sphere_size(rank, n) for n in range(radius + 1)], dtype=float)
    lengths = rng.choice(radius + 1, size=count, p=sizes / sizes.sum())
    return [random_word_of_length(rng, rank, int(k)) for k in lengths]


def random_word_of_length(rng: np.random.Generator, rank: int, k: int) -> str:
    letters = FreeGroup(rank).generators
    inverse = {g: g.swapcase() for g in letters}
    out: list[str] = []
    for _ in range(k):
        choices = [g for g in letters if not out or g != inverse[out[-1]]]
        out.append(choices[int(rng.integers(len(choices)))])
    return "".join(out)


def random_pairs(seed: int, count: int, radius: int, rank: int = 2) -> list[tuple[str, str]]:
    rng = np.random.default_rng(seed)
    A = random_words(rng, rank, radius, count)
    B = random_words(rng, rank, radius, count)
    return list(zip(A, B))


@dataclass(frozen=True)
class EquivariantEstimate:
    r_grid: np.ndarray
    rho_norms: np.ndarray
    rho_pairs: np.ndarray
    slope: float
    window: tuple
    sphere_sampling: dict

    @property
    def consistent(self) -> bool:
        return bool(np.array_equal(self.rho_norms, self.rho_pairs))

    def to_dict(self) -> dict:
        return {
            "r": self.r_grid.tolist(),
            "rho_norms": self.rho_norms.tolist(),
            "rho_pairs": self.rho_pairs.tolist(),
            "consistent": self.consistent,
            "slope": self.slope,
            "window": list(self.window),
            "sphere_sampling": self.sphere_sampling,
            "strategy": {"norms": "exhaustive/sampled spheres", "pairs": TREE_CLOSED_FORM},
            "note": "R_Gamma(F2) >= slope of b; the ceiling 1/2 is not checked numerically",
        }


def sphere_norm_minima(r_max: int, seed: int = 0, samples: int = 2000, rank: int = 2, cocycle: Callable = tree_cocycle):
    """``min |b(s)|`` over each sphere ``|s| = n``; exhaustive up to length 8, sampled beyond."""
    F = FreeGroup(rank)
    rng = np.random.default_rng(seed)
    mins, how = [], {}
    full = F.ball(min(r_max, EXHAUSTIVE_SPHERE))
    for n in range(1, r_max + 1):
        if n <= EXHAUSTIVE_SPHERE:
            words = full.sphere(n)
            how[n] = f"exhaustive:{len(words)}"
        else:
            words = [random_word_of_length(rng, rank, n) for _ in range(samples)]
            how[n] = f"sampled:{samples}"
        mins.append(min(cocycle(w).norm() for w in words))
    return np.array(mins), how


def equivariant_compression(r_max: int = 16, window: tuple[int, int] | None = None, seed: int = 0, samples: int = 2000) -> EquivariantEstimate:
    """``rho_b`` two ways: (a) from sphere norms and (b) from pairwise distances
    over the ball of radius ``r_max / 2`` via the closed form."""
    if r_max < 4:
        raise ConfigError("r_max must be at least 4")
    mins, how = sphere_norm_minima(r_max, seed, samples)
    rho_norms = np.minimum.accumulate(mins[::-1])[::-1]  # inf over |s| >= r
    prof = compression_profile(FreeGroup(2), TreeEmbedding(0.0), r_max, strategy=TREE_CLOSED_FORM)
    window = (max(2, r_max // 2), r_max) if window is None else window
    est = asymptotic_compression(prof, window)
    return EquivariantEstimate(
        r_grid=prof.r_grid,
        rho_norms=rho_norms,
        rho_pairs=prof.rho,
        slope=est.slope,
        window=est.window,
        sphere_sampling=how,
    )


def sqrt_profile_exact(est: EquivariantEstimate) -> bool:
    """Does ``rho_b(r) = sqrt(r)`` hold exactly (as ``rho**2 == r``) on the grid?"""
    return all(math.isclose(x * x, r, rel_tol=0, abs_tol=1e-12) for x, r in zip(est.rho_norms, est.r_grid))
