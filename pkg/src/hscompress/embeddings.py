"""Explicit large-scale Lipschitz maps into Hilbert space.

Vectors are finitely supported: a sparse coefficient map over hashable
coordinate keys plus an optional list of weighted intervals (for the
staircase maps into L2 of the line).  Inner products of interval parts
are overlap measures, so rational inputs give exact results.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from numbers import Real
from typing import Hashable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy import sparse

from .errors import ConfigError, DomainError, InputError
from .spaces import FreeGroup, GroupSpec, LatticeZn, Product, lcp_length, lcp_matrix


# -- coordinate keys ---------------------------------------------------------------

class Edge(NamedTuple):
    """Undirected Cayley-graph edge between adjacent reduced words, endpoints sorted."""

    u: str
    v: str

    @classmethod
    def of(cls, a: str, b: str) -> "Edge":
        lo, hi = (a, b) if a <= b else (b, a)
        if not (len(hi) == len(lo) + 1 and hi.startswith(lo)):
            raise DomainError(f"{a!r} and {b!r} are not adjacent")
        return cls(lo, hi)


class Axis(NamedTuple):
    index: int


class Summand(NamedTuple):
    """Key of a coordinate inside the ``slot``-th summand of a direct sum."""

    slot: int
    key: Hashable


# -- vectors -------------------------------------------------------------------------

def _normalize_intervals(items) -> tuple:
    """Rewrite weighted intervals as disjoint pieces with nonzero weight."""
    by_comp = defaultdict(list)
    for comp, lo, hi, w in items:
        if hi < lo:
            raise DomainError(f"interval [{lo}, {hi}] is reversed")
        if hi > lo and w != 0:
            by_comp[comp].append((lo, hi, w))
    out = []
    for comp in sorted(by_comp, key=repr):
        pieces = by_comp[comp]
        cuts = sorted({p for lo, hi, _ in pieces for p in (lo, hi)})
        merged: list[list] = []
        for a, b in zip(cuts, cuts[1:]):
            w = sum(wt for lo, hi, wt in pieces if lo <= a and b <= hi)
            if w == 0:
                continue
            if merged and merged[-1][2] == a and merged[-1][3] == w:
                merged[-1][2] = b
            else:
                merged.append([comp, a, b, w])
        out.extend(tuple(m) for m in merged)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class HilbertVector:
    coeffs: Mapping[Hashable, Real] = field(default_factory=dict)
    intervals: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", {k: v for k, v in self.coeffs.items() if v != 0})
        object.__setattr__(self, "intervals", _normalize_intervals(self.intervals))

    @classmethod
    def zero(cls) -> "HilbertVector":
        return cls()

    @property
    def support(self):
        return set(self.coeffs)

    def __add__(self, other: "HilbertVector") -> "HilbertVector":
        c = dict(self.coeffs)
        for k, v in other.coeffs.items():
            c[k] = c.get(k, 0) + v
        return HilbertVector(c, self.intervals + other.intervals)

    def __neg__(self) -> "HilbertVector":
        return self.scale(-1)

    def __sub__(self, other: "HilbertVector") -> "HilbertVector":
        return self + (-other)

    def scale(self, a) -> "HilbertVector":
        return HilbertVector(
            {k: a * v for k, v in self.coeffs.items()},
            tuple((c, lo, hi, a * w) for c, lo, hi, w in self.intervals),
        )

    def inner(self, other: "HilbertVector"):
        small, big = (self, other) if len(self.coeffs) <= len(other.coeffs) else (other, self)
        total = sum((v * big.coeffs[k] for k, v in small.coeffs.items() if k in big.coeffs), 0)
        for c1, lo1, hi1, w1 in self.intervals:
            for c2, lo2, hi2, w2 in other.intervals:
                if c1 == c2:
                    overlap = min(hi1, hi2) - max(lo1, lo2)
                    if overlap > 0:
                        total += w1 * w2 * overlap
        return total

    def norm_sq(self):
        return sum((v * v for v in self.coeffs.values()), 0) + sum(
            (w * w * (hi - lo) for _, lo, hi, w in self.intervals), 0
        )

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def is_zero(self) -> bool:
        return not self.coeffs and not self.intervals

    def map_keys(self, fn) -> "HilbertVector":
        return HilbertVector(
            {fn(k): v for k, v in self.coeffs.items()},
            tuple((fn(c), lo, hi, w) for c, lo, hi, w in self.intervals),
        )

    def __eq__(self, other):
        if not isinstance(other, HilbertVector):
            return NotImplemented
        return self.coeffs == other.coeffs and self.intervals == other.intervals

    def __repr__(self):
        parts = [f"{k}: {v}" for k, v in sorted(self.coeffs.items(), key=lambda kv: repr(kv[0]))]
        parts += [f"{c}[{lo},{hi}]: {w}" for c, lo, hi, w in self.intervals]
        return "HilbertVector({" + ", ".join(parts) + "})"


def direct_sum_vectors(*vectors: HilbertVector) -> HilbertVector:
    out = HilbertVector()
    for slot, v in enumerate(vectors):
        out = out + v.map_keys(lambda k, slot=slot: Summand(slot, k))
    return out


def _as_coords(x) -> dict:
    """Read a lattice point or coefficient-only vector as coordinates."""
    if isinstance(x, HilbertVector):
        if x.intervals:
            raise ConfigError("interval vectors have no coordinate reading")
        return dict(x.coeffs)
    if isinstance(x, Real):
        return {Axis(0): x} if x != 0 else {}
    return {Axis(i): c for i, c in enumerate(x) if c != 0}


def _coord_matrix(points, keys=None):
    dicts = [_as_coords(p) for p in points]
    if keys is None:
        keys = {}
    for d in dicts:
        for k in d:
            keys.setdefault(k, len(keys))
    return dicts, keys


def _dense_coords(A, B):
    da, keys = _coord_matrix(A)
    db, keys = _coord_matrix(B, keys)
    ma = np.zeros((len(A), len(keys)))
    mb = np.zeros((len(B), len(keys)))
    for m, ds in ((ma, da), (mb, db)):
        for i, d in enumerate(ds):
            for k, v in d.items():
                m[i, keys[k]] = float(v)
    return ma, mb


def _sparse_features(vectors: Sequence[HilbertVector], keys: dict):
    rows, cols, vals = [], [], []
    for i, v in enumerate(vectors):
        if v.intervals:
            raise ConfigError("interval vectors cannot be assembled into a feature matrix")
        for k, c in v.coeffs.items():
            rows.append(i)
            cols.append(keys.setdefault(k, len(keys)))
            vals.append(float(c))
    return rows, cols, vals


def gram_sq_distances(VA: Sequence[HilbertVector], VB: Sequence[HilbertVector]) -> np.ndarray:
    """Squared distances between two lists of coefficient vectors via a sparse Gram matrix."""
    keys: dict = {}
    ra, ca, va = _sparse_features(VA, keys)
    rb, cb, vb = _sparse_features(VB, keys)
    n = max(len(keys), 1)
    FA = sparse.csr_matrix((va, (ra, ca)), shape=(len(VA), n))
    FB = sparse.csr_matrix((vb, (rb, cb)), shape=(len(VB), n))
    na = np.asarray(FA.multiply(FA).sum(axis=1)).ravel()
    nb = np.asarray(FB.multiply(FB).sum(axis=1)).ravel()
    G = (FA @ FB.T).toarray()
    return np.maximum(na[:, None] + nb[None, :] - 2 * G, 0.0)


# -- closed forms for the weighted tree map --------------------------------------

def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0 <= eps < 0.5:
        raise DomainError(f"eps must lie in [0, 1/2), got {eps}")
    return eps


def weighted_tree_closed_form(k_s: int, k_t: int, p: int, eps: float):
    """Squared distance between the weighted tree images of two words.

    ``k_s``, ``k_t`` are the word lengths and ``p`` their common-prefix
    length.  With ``eps == 0`` the result is the integer ``k_s + k_t - 2p``.
    """
    eps = _check_eps(eps)
    if not (0 <= p <= min(k_s, k_t)):
        raise DomainError(f"common prefix {p} out of range for lengths {k_s}, {k_t}")
    if eps == 0:
        return k_s + k_t - 2 * p
    total = sum(j ** (2 * eps) for j in range(1, k_s - p + 1))
    total += sum(j ** (2 * eps) for j in range(1, k_t - p + 1))
    total += sum(((k_s - m + 1) ** eps - (k_t - m + 1) ** eps) ** 2 for m in range(1, p + 1))
    return total


def closed_form_table(R: int, eps: float) -> np.ndarray:
    """``T[k_s, k_t, p]`` for all lengths up to ``R`` (NaN where ``p`` is out of range)."""
    eps = _check_eps(eps)
    T = np.full((R + 1, R + 1, R + 1), np.nan)
    pw = np.arange(R + 2, dtype=float) ** eps
    prefix = np.concatenate([[0.0], np.cumsum(pw[1:] ** 2)])  # prefix[n] = sum_{j<=n} j^{2eps}
    for ks in range(R + 1):
        for kt in range(R + 1):
            shared = 0.0
            T[ks, kt, 0] = prefix[ks] + prefix[kt]
            for p in range(1, min(ks, kt) + 1):
                shared += (pw[ks - p + 1] - pw[kt - p + 1]) ** 2
                T[ks, kt, p] = prefix[ks - p] + prefix[kt - p] + shared
    return T


def lipschitz_generator_bound(eps: float) -> float:
    """Bound on the sum of squared weight increments, so adjacent words map within ``sqrt(1 + bound)``."""
    eps = _check_eps(eps)
    return eps * eps / (1 - 2 * eps)


def compression_lower_constant(eps: float) -> float:
    """``C`` with ``|f(s) - f(t)|^2 >= C r^(1+2 eps)`` whenever ``d(s, t) >= r``."""
    eps = _check_eps(eps)
    return 1.0 / (2 ** (2 * eps + 1) * (2 * eps + 1))


# -- embedding specs ---------------------------------------------------------------

class EmbeddingSpec:
    """A map from a source space; ``embed`` evaluates it pointwise.

    ``input_kind``/``output_kind`` drive composition checks:
    ``word``, ``lattice``, ``real``, ``coords`` (a coordinate vector read in
    whatever norm the consumer uses), ``hilbert`` and ``any``.
    """

    input_kind = "any"
    output_kind = "hilbert"

    def describe(self) -> str:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.describe()}>"

    def check_space(self, space: GroupSpec) -> None:
        pass

    def embed(self, x):
        raise NotImplementedError

    def pair_distance(self, x, y) -> float:
        diff = self.embed(x) - self.embed(y)
        return math.sqrt(float(diff.norm_sq()))

    def image_distances(self, A, B=None) -> np.ndarray:
        """Target-metric distances between the images of two point lists."""
        B = A if B is None else B
        return np.sqrt(gram_sq_distances([self.embed(a) for a in A], [self.embed(b) for b in B]))

    def paired_image_distances(self, A, B) -> np.ndarray:
        """Elementwise image distances ``|f(A[i]) - f(B[i])|``."""
        return np.array([self.pair_distance(x, y) for x, y in zip(A, B)], dtype=float)

    def source_distances(self, A, B=None) -> np.ndarray:
        """Distances in this map's own source metric (used for intermediate spaces)."""
        raise ConfigError(f"{self.describe()} has no intrinsic source metric")


class TreeEmbedding(EmbeddingSpec):
    """Free group into l2 of the Cayley-graph edges with weights ``j**eps``.

    The ``j``-th edge on the geodesic from ``s`` back to the identity gets
    weight ``j**eps``; the edge at ``s`` itself is ``j = 1``.  ``eps = 0``
    is the unweighted tree map with ``|f(s) - f(t)|^2 = d(s, t)``.
    """

    input_kind = "word"

    def __init__(self, eps: float = 0.0):
        self.eps = _check_eps(eps)

    def describe(self):
        return "tree" if self.eps == 0 else f"weighted-tree:eps={self.eps:g}"

    def check_space(self, space):
        if not (isinstance(space, FreeGroup) and space.standard):
            raise ConfigError("tree embeddings need a free group with its standard generators")

    def weight(self, j: int):
        return 1 if self.eps == 0 else j**self.eps

    def embed(self, s):
        k = len(s)
        return HilbertVector({Edge(s[: i - 1], s[:i]): self.weight(k - i + 1) for i in range(1, k + 1)})

    def pair_distance(self, s, t):
        return math.sqrt(weighted_tree_closed_form(len(s), len(t), lcp_length(s, t), self.eps))

    def image_distances(self, A, B=None):
        B = A if B is None else B
        la, lb, lcp = lcp_matrix(A, B)
        R = int(max(la.max(initial=0), lb.max(initial=0)))
        T = closed_form_table(R, self.eps)
        return np.sqrt(T[la[:, None], lb[None, :], lcp])

    def paired_image_distances(self, A, B):
        la = np.array([len(x) for x in A], dtype=np.int64)
        lb = np.array([len(y) for y in B], dtype=np.int64)
        p = np.array([lcp_length(x, y) for x, y in zip(A, B)], dtype=np.int64)
        T = closed_form_table(int(max(la.max(initial=0), lb.max(initial=0))), self.eps)
        return np.sqrt(T[la, lb, p])

    def source_distances(self, A, B=None):
        B = A if B is None else B
        la, lb, lcp = lcp_matrix(A, B)
        return (la[:, None] + lb[None, :] - 2 * lcp).astype(float)


class CoordinateIsometric(EmbeddingSpec):
    """Z^n -> l2, a point goes to its own coordinate vector."""

    input_kind = "lattice"
    output_kind = "coords"

    def __init__(self, n: int | None = None):
        self.n = n

    def describe(self):
        return "iso" if self.n is None else f"iso-zn:n={self.n}"

    def check_space(self, space):
        if not isinstance(space, LatticeZn) or (self.n is not None and space.n != self.n):
            raise ConfigError(f"{self.describe()} needs a lattice source, got {space.name}")

    def embed(self, x):
        if isinstance(x, Real):
            x = (x,)
        if self.n is not None and len(x) != self.n:
            raise ConfigError(f"{self.describe()} got a point of dimension {len(x)}")
        return HilbertVector(_as_coords(x))

    def image_distances(self, A, B=None):
        B = A if B is None else B
        a, b = _dense_coords(A, B)
        return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))

    def source_distances(self, A, B=None):
        B = A if B is None else B
        a, b = _dense_coords(A, B)
        return np.abs(a[:, None, :] - b[None, :, :]).sum(axis=-1)


def staircase_vector(x, component: Hashable = Axis(0)) -> HilbertVector:
    """Indicator of ``[0, x]`` (or ``[x, 0]`` for negative ``x``) in L2 of the line."""
    lo, hi = (0, x) if x >= 0 else (x, 0)
    return HilbertVector({}, ((component, lo, hi, 1),))


class Staircase(EmbeddingSpec):
    """R -> L2(R), ``|g(x) - g(y)|^2 = |x - y|``."""

    input_kind = "real"

    def describe(self):
        return "staircase"

    def check_space(self, space):
        if not (isinstance(space, LatticeZn) and space.n == 1):
            raise ConfigError("staircase needs a one-dimensional source")

    @staticmethod
    def _scalar(x):
        if isinstance(x, tuple):
            if len(x) != 1:
                raise ConfigError("staircase takes scalars")
            x = x[0]
        if not isinstance(x, Real):
            raise InputError(f"staircase takes real numbers, got {x!r}")
        return x

    def embed(self, x):
        return staircase_vector(self._scalar(x))

    def pair_distance(self, x, y):
        diff = self.embed(x) - self.embed(y)
        return math.sqrt(diff.norm_sq())

    def image_distances(self, A, B=None):
        B = A if B is None else B
        return np.sqrt(self.source_distances(A, B))

    def source_distances(self, A, B=None):
        B = A if B is None else B
        a = np.array([float(self._scalar(x)) for x in A])
        b = np.array([float(self._scalar(x)) for x in B])
        return np.abs(a[:, None] - b[None, :])


class L1ToL2(EmbeddingSpec):
    """l1 -> direct sum of L2(R), one staircase per coordinate."""

    input_kind = "coords"

    def describe(self):
        return "l1l2"

    def check_space(self, space):
        if not isinstance(space, LatticeZn):
            raise ConfigError("l1l2 needs a lattice (l1) source")

    def embed(self, x):
        out = HilbertVector()
        for k, c in sorted(_as_coords(x).items(), key=lambda kv: repr(kv[0])):
            out = out + staircase_vector(c, component=k)
        return out

    def image_distances(self, A, B=None):
        return np.sqrt(self.source_distances(A, B))

    def source_distances(self, A, B=None):
        B = A if B is None else B
        a, b = _dense_coords(A, B)
        return np.abs(a[:, None, :] - b[None, :, :]).sum(axis=-1)


class DirectSum(EmbeddingSpec):
    """``h(x, y) = f(x) + g(y)`` on a two-factor product, summands orthogonal."""

    input_kind = "pair"

    def __init__(self, f: EmbeddingSpec, g: EmbeddingSpec):
        self.f = f
        self.g = g

    def describe(self):
        return f"sum({self.f.describe()},{self.g.describe()})"

    def check_space(self, space):
        if not (isinstance(space, Product) and len(space.factors) == 2):
            raise ConfigError("a direct sum needs a two-factor product source")
        self.f.check_space(space.factors[0])
        self.g.check_space(space.factors[1])

    def embed(self, x):
        return direct_sum_vectors(_as_vector(self.f.embed(x[0])), _as_vector(self.g.embed(x[1])))

    def pair_distance(self, x, y):
        return math.hypot(self.f.pair_distance(x[0], y[0]), self.g.pair_distance(x[1], y[1]))

    def image_distances(self, A, B=None):
        B = A if B is None else B
        df = self.f.image_distances([a[0] for a in A], [b[0] for b in B])
        dg = self.g.image_distances([a[1] for a in A], [b[1] for b in B])
        return np.sqrt(df**2 + dg**2)


def _as_vector(v):
    if isinstance(v, HilbertVector):
        return v
    return HilbertVector(_as_coords(v))


_COMPATIBLE = {
    ("any", k) for k in ("word", "lattice", "real", "coords", "hilbert", "pair")
} | {
    ("coords", "coords"),
    ("coords", "lattice"),
    ("hilbert", "hilbert"),
    ("hilbert", "coords"),
    ("lattice", "lattice"),
    ("real", "lattice"),
}


class Compose(EmbeddingSpec):
    """``outer . inner``; the intermediate space carries ``outer``'s source metric."""

    def __init__(self, outer: EmbeddingSpec, inner: EmbeddingSpec):
        if (outer.input_kind, inner.output_kind) not in _COMPATIBLE:
            raise ConfigError(
                f"cannot compose {outer.describe()} (takes {outer.input_kind}) "
                f"after {inner.describe()} (gives {inner.output_kind})"
            )
        self.outer = outer
        self.inner = inner
        self.input_kind = inner.input_kind
        self.output_kind = outer.output_kind

    def describe(self):
        return f"compose({self.outer.describe()},{self.inner.describe()})"

    def check_space(self, space):
        self.inner.check_space(space)

    def embed(self, x):
        return self.outer.embed(self.inner.embed(x))

    def pair_distance(self, x, y):
        return self.outer.pair_distance(self.inner.embed(x), self.inner.embed(y))

    def image_distances(self, A, B=None):
        B = A if B is None else B
        IA = [self.inner.embed(a) for a in A]
        IB = [self.inner.embed(b) for b in B]
        return self.outer.image_distances(IA, IB)

    def source_distances(self, A, B=None):
        return self.inner.source_distances(A, B)


class Identity(EmbeddingSpec):
    """Identity of a Hilbert space (coordinate vectors read in l2)."""

    input_kind = "hilbert"
    output_kind = "hilbert"

    def describe(self):
        return "identity"

    def check_space(self, space):
        if not isinstance(space, LatticeZn):
            raise ConfigError("identity needs coordinate (lattice) points")

    def embed(self, x):
        return _as_vector(x)

    def image_distances(self, A, B=None):
        B = A if B is None else B
        VA, VB = [_as_vector(a) for a in A], [_as_vector(b) for b in B]
        if any(v.intervals for v in VA + VB):
            return np.array([[self.pair_distance(a, b) for b in VB] for a in VA])
        return np.sqrt(gram_sq_distances(VA, VB))

    source_distances = image_distances


class Dilation(EmbeddingSpec):
    """``n -> c n`` on Z^k with the l1 metric on both sides; a quasi-isometry."""

    input_kind = "lattice"
    output_kind = "lattice"

    def __init__(self, factor: int = 2):
        if factor == 0:
            raise DomainError("dilation factor must be nonzero")
        self.factor = factor

    def describe(self):
        return f"dilate:c={self.factor}"

    def check_space(self, space):
        if not isinstance(space, LatticeZn):
            raise ConfigError("dilation needs a lattice source")

    def embed(self, x):
        if isinstance(x, HilbertVector):
            return x.scale(self.factor)
        if isinstance(x, Real):
            x = (x,)
        return tuple(self.factor * c for c in x)

    def pair_distance(self, x, y):
        return float(self.image_distances([x], [y])[0, 0])

    def image_distances(self, A, B=None):
        B = A if B is None else B
        return abs(self.factor) * self.source_distances(A, B)

    def source_distances(self, A, B=None):
        B = A if B is None else B
        a, b = _dense_coords(A, B)
        return np.abs(a[:, None, :] - b[None, :, :]).sum(axis=-1)


class Constant(EmbeddingSpec):
    """Every point goes to zero; compression is identically zero."""

    def describe(self):
        return "const"

    def embed(self, x):
        return HilbertVector()

    def pair_distance(self, x, y):
        return 0.0

    def image_distances(self, A, B=None):
        B = A if B is None else B
        return np.zeros((len(A), len(B)))


def direct_sum(f: EmbeddingSpec, g: EmbeddingSpec) -> DirectSum:
    return DirectSum(f, g)


def compose(outer: EmbeddingSpec, inner: EmbeddingSpec) -> Compose:
    return Compose(outer, inner)


def embed(spec: EmbeddingSpec, x):
    return spec.embed(x)


def pair_distance(spec: EmbeddingSpec, x, y) -> float:
    return spec.pair_distance(x, y)


def _split_args(s: str) -> list[str]:
    parts, depth, cur = [], 0, ""
    for ch in s:
        if ch == "," and depth == 0:
            parts.append(cur.strip())
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    parts.append(cur.strip())
    return parts


def parse_embedding(s: str) -> EmbeddingSpec:
    """Parse ``tree``, ``weighted-tree:eps=0.25``, ``staircase``, ``l1l2``, ``iso``,
    ``iso-zn:n=3``, ``sum(f,g)``, ``compose(f,g)``, ``dilate:c=2``, ``const``, ``identity``."""
    s = s.strip()
    low = s.lower()
    for name, ctor in (("sum(", DirectSum), ("compose(", Compose)):
        if low.startswith(name) and low.endswith(")"):
            args = _split_args(s[len(name):-1])
            if len(args) != 2:
                raise InputError(f"{name[:-1]} takes two arguments: {s!r}")
            return ctor(parse_embedding(args[0]), parse_embedding(args[1]))
    head, *rest = s.split(":")
    params = {}
    for item in rest:
        if "=" not in item:
            raise InputError(f"bad parameter {item!r} in {s!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = v.strip()
    head = head.strip().lower()
    try:
        if head == "tree":
            return TreeEmbedding(float(params.get("eps", 0.0)))
        if head == "weighted-tree":
            return TreeEmbedding(float(params["eps"]))
        if head == "iso":
            return CoordinateIsometric(int(params["n"]) if "n" in params else None)
        if head == "iso-zn":
            return CoordinateIsometric(int(params.get("n", 1)))
        if head == "staircase":
            return Staircase()
        if head == "l1l2":
            return L1ToL2()
        if head == "dilate":
            return Dilation(int(params.get("c", 2)))
        if head == "const":
            return Constant()
        if head == "identity":
            return Identity()
    except KeyError as exc:
        raise InputError(f"missing parameter {exc} in {s!r}") from exc
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise InputError(f"bad embedding spec {s!r}: {exc}") from exc
    raise InputError(f"unknown embedding spec {s!r}")
