"""Finitely generated groups and fixture metric spaces.

Free-group elements are plain ``str`` objects holding a freely reduced word
over ``a, A, b, B, ...`` (upper case is the inverse letter).  Lattice and
Heisenberg elements are integer tuples; products use tuples of factor
points; point clouds use integer indices into a stored distance matrix.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import CapacityError, ConfigError, InputError, OutOfRangeError

ALPHABET = "abcdefghijklmnopqrstuvwxyz"

#: Default caps; each can be overridden through the environment.
DEFAULT_MAX_POINTS = 2_000_000
DEFAULT_HEISENBERG_CAP = 14
DEFAULT_GENSET_CAP = 8

ReducedWord = str
Point = Hashable


def max_points() -> int:
    return int(os.environ.get("HSCOMPRESS_MAX_POINTS", DEFAULT_MAX_POINTS))


def heisenberg_cap() -> int:
    return int(os.environ.get("HSCOMPRESS_HEIS_CAP", DEFAULT_HEISENBERG_CAP))


# -- free words ---------------------------------------------------------------

def reduce_word(letters: Iterable[str], rank: int | None = None) -> ReducedWord:
    """Freely reduce a letter sequence.

    >>> reduce_word("abBA")
    ''
    """
    allowed = None if rank is None else set(ALPHABET[:rank] + ALPHABET[:rank].upper())
    stack: list[str] = []
    for c in letters:
        if not (len(c) == 1 and c.isalpha() and c.lower() in ALPHABET):
            raise InputError(f"invalid letter {c!r}")
        if allowed is not None and c not in allowed:
            raise InputError(f"letter {c!r} not in alphabet of rank {rank}")
        if stack and stack[-1] == c.swapcase():
            stack.pop()
        else:
            stack.append(c)
    return "".join(stack)


def invert_word(w: ReducedWord) -> ReducedWord:
    return w[::-1].swapcase()


def lcp_length(x: str, y: str) -> int:
    n = min(len(x), len(y))
    i = 0
    while i < n and x[i] == y[i]:
        i += 1
    return i


def free_sphere_size(rank: int, n: int) -> int:
    if n == 0:
        return 1
    if rank == 0:
        return 0
    return 2 * rank * (2 * rank - 1) ** (n - 1)


def lattice_sphere_size(dim: int, n: int) -> int:
    if n == 0:
        return 1
    return sum(math.comb(dim, k) * 2**k * math.comb(n - 1, k - 1) for k in range(1, min(dim, n) + 1))


def lcp_matrix(A: Sequence[str], B: Sequence[str]):
    """Word lengths of ``A`` and ``B`` and the matrix of common-prefix lengths."""
    ids: dict[str, int] = {}
    depth = max([len(w) for w in itertools.chain(A, B)] + [0])

    def ancestors(words):
        out = np.full((len(words), depth), -1, dtype=np.int64)
        for i, w in enumerate(words):
            for j in range(len(w)):
                out[i, j] = ids.setdefault(w[: j + 1], len(ids))
        return out

    pa, pb = ancestors(A), ancestors(B)
    la = np.array([len(w) for w in A], dtype=np.int64)
    lb = np.array([len(w) for w in B], dtype=np.int64)
    lcp = np.zeros((len(A), len(B)), dtype=np.int64)
    # equal ancestors at depth j imply equal ancestors at every smaller depth
    for j in range(depth):
        col_a = pa[:, j][:, None]
        lcp += (col_a == pb[:, j][None, :]) & (col_a >= 0)
    return la, lb, lcp


@dataclass(frozen=True)
class Ball:
    """Points at distance at most ``radius`` from ``center``, sorted by distance."""

    center: Point
    radius: int
    points: tuple
    lengths: tuple
    sphere_sizes: tuple

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def sphere(self, n: int) -> list:
        return [p for p, k in zip(self.points, self.lengths) if k == n]

    def growth_rows(self):
        return [(n, s) for n, s in enumerate(self.sphere_sizes)]


def _check_capacity(predicted: int, what: str) -> None:
    cap = max_points()
    if predicted > cap:
        raise CapacityError(
            f"{what} would hold {predicted} points, above the cap of {cap} "
            "(set HSCOMPRESS_MAX_POINTS or use the sampled strategy)",
            predicted=predicted,
            cap=cap,
        )


def _ball_from_lengths(center, radius, items: Sequence[tuple]) -> Ball:
    sizes = [0] * (radius + 1)
    for _, k in items:
        sizes[k] += 1
    return Ball(
        center=center,
        radius=radius,
        points=tuple(p for p, _ in items),
        lengths=tuple(k for _, k in items),
        sphere_sizes=tuple(sizes),
    )


class GroupSpec:
    """A finitely generated group with a word metric for a finite symmetric generating set."""

    name = "group"
    is_group = True

    @property
    def generators(self) -> tuple:
        raise NotImplementedError

    @property
    def card_S(self) -> int:
        return len(self.generators)

    @property
    def identity(self) -> Point:
        raise NotImplementedError

    def multiply(self, x, y):
        raise NotImplementedError

    def inverse(self, x):
        raise NotImplementedError

    def length(self, x) -> int:
        raise NotImplementedError

    def validate(self, x) -> None:
        pass

    def distance(self, x, y) -> float:
        self.validate(x)
        self.validate(y)
        if x == y:
            return 0
        return self.length(self.multiply(self.inverse(x), y))

    def predicted_ball_size(self, R: int) -> int | None:
        return None

    def ball(self, R: int) -> Ball:
        if R < 0:
            raise InputError("radius must be non-negative")
        predicted = self.predicted_ball_size(R)
        if predicted is not None:
            _check_capacity(predicted, f"ball of radius {R} in {self.name}")
        return self._bfs_ball(R)

    def _bfs_ball(self, R: int) -> Ball:
        e = self.identity
        seen = {e: 0}
        items = [(e, 0)]
        frontier = [e]
        cap = max_points()
        for r in range(1, R + 1):
            nxt = []
            for p in frontier:
                for g in self.generators:
                    q = self.multiply(p, g)
                    if q not in seen:
                        seen[q] = r
                        nxt.append(q)
            items.extend((q, r) for q in nxt)
            if len(items) > cap:
                raise CapacityError(
                    f"ball enumeration exceeded the cap of {cap} points at radius {r}",
                    predicted=len(items),
                    cap=cap,
                )
            frontier = nxt
        return _ball_from_lengths(e, R, items)

    def distance_matrix(self, A: Sequence, B: Sequence | None = None) -> np.ndarray:
        B = A if B is None else B
        out = np.empty((len(A), len(B)), dtype=float)
        for i, x in enumerate(A):
            for j, y in enumerate(B):
                out[i, j] = self.distance(x, y)
        return out

    def paired_distances(self, A: Sequence, B: Sequence) -> np.ndarray:
        """Elementwise ``d(A[i], B[i])``."""
        return np.array([self.distance(x, y) for x, y in zip(A, B)], dtype=float)

    def format_point(self, x) -> str:
        return str(x)

    def parse_point(self, s: str):
        raise InputError(f"cannot parse points for {self.name}")


class FreeGroup(GroupSpec):
    """Free group of the given rank.

    ``extra_generators`` adds further (reduced) words and their inverses to
    the standard generating set; the word metric is then computed from a BFS
    table, which is how the generator-set variants of F2 are built.
    """

    def __init__(self, rank: int = 2, extra_generators: Sequence[str] = ()):
        if not 1 <= rank <= len(ALPHABET):
            raise InputError(f"unsupported rank {rank}")
        self.rank = rank
        self.letters = "".join(c + c.upper() for c in ALPHABET[:rank])
        extra = []
        for w in extra_generators:
            w = reduce_word(w, rank)
            if not w:
                raise InputError("extra generator reduces to the identity")
            for v in (w, invert_word(w)):
                if v not in extra and v not in self.letters:
                    extra.append(v)
        self.extra = tuple(extra)
        self.name = f"F{rank}" if not self.extra else f"F{rank}[{','.join(extra_generators)}]"
        self._table: dict[str, int] | None = None
        self._table_radius = -1

    @property
    def standard(self) -> bool:
        return not self.extra

    @property
    def generators(self) -> tuple:
        return tuple(self.letters) + self.extra

    @property
    def identity(self) -> str:
        return ""

    def validate(self, x) -> None:
        if not isinstance(x, str):
            raise InputError(f"free-group point must be a word, got {x!r}")
        if reduce_word(x, self.rank) != x:
            raise InputError(f"word {x!r} is not freely reduced")

    def multiply(self, x, y):
        return reduce_word(x + y)

    def inverse(self, x):
        return invert_word(x)

    def _genset_table(self, radius: int) -> dict[str, int]:
        cap = int(os.environ.get("HSCOMPRESS_GENSET_CAP", DEFAULT_GENSET_CAP))
        if radius > cap:
            raise OutOfRangeError(
                f"{self.name} length table needs radius {radius}, above cap {cap}",
                required_radius=radius,
                cap=cap,
            )
        if radius > self._table_radius:
            ball = self._bfs_ball(radius)
            self._table = dict(zip(ball.points, ball.lengths))
            self._table_radius = radius
        return self._table

    def length(self, x) -> int:
        if self.standard:
            return len(x)
        # |x|' <= |x|, so a table of radius |x| always contains x
        return self._genset_table(len(x))[x]

    def distance(self, x, y) -> int:
        self.validate(x)
        self.validate(y)
        if self.standard:
            return len(x) + len(y) - 2 * lcp_length(x, y)
        return self.length(self.multiply(invert_word(x), y))

    def predicted_ball_size(self, R: int) -> int | None:
        if not self.standard:
            k = len(self.generators)
            return 1 + sum(k * (k - 1) ** (n - 1) for n in range(1, R + 1))
        return sum(free_sphere_size(self.rank, n) for n in range(R + 1))

    def ball(self, R: int) -> Ball:
        if R < 0:
            raise InputError("radius must be non-negative")
        _check_capacity(self.predicted_ball_size(R), f"ball of radius {R} in {self.name}")
        if not self.standard:
            return self._bfs_ball(R)
        items = [("", 0)]
        frontier = [""]
        for r in range(1, R + 1):
            nxt = [w + c for w in frontier for c in self.letters if not w or w[-1] != c.swapcase()]
            items.extend((w, r) for w in nxt)
            frontier = nxt
        return _ball_from_lengths("", R, items)

    def sphere_size(self, n: int) -> int:
        if not self.standard:
            raise ConfigError("closed-form sphere sizes need the standard generating set")
        return free_sphere_size(self.rank, n)

    def distance_matrix(self, A, B=None):
        if not self.standard:
            return super().distance_matrix(A, B)
        B = A if B is None else B
        la, lb, lcp = lcp_matrix(A, B)
        return (la[:, None] + lb[None, :] - 2 * lcp).astype(float)

    def paired_distances(self, A, B):
        if not self.standard:
            return super().paired_distances(A, B)
        return np.array([len(x) + len(y) - 2 * lcp_length(x, y) for x, y in zip(A, B)], dtype=float)

    def format_point(self, x) -> str:
        return x if x else "1"

    def parse_point(self, s: str):
        s = s.strip()
        return "" if s in ("", "1") else reduce_word(s, self.rank)


class LatticeZn(GroupSpec):
    """Z^n with the standard generators; the word metric is the l1 metric."""

    def __init__(self, n: int = 1):
        if n < 1:
            raise InputError("dimension must be positive")
        self.n = n
        self.name = f"Z{n}" if n > 1 else "Z"

    @property
    def generators(self):
        gens = []
        for i in range(self.n):
            for s in (1, -1):
                v = [0] * self.n
                v[i] = s
                gens.append(tuple(v))
        return tuple(gens)

    @property
    def identity(self):
        return (0,) * self.n

    def validate(self, x):
        if not (isinstance(x, tuple) and len(x) == self.n and all(isinstance(c, (int, np.integer)) for c in x)):
            raise InputError(f"{x!r} is not a point of {self.name}")

    def multiply(self, x, y):
        return tuple(a + b for a, b in zip(x, y))

    def inverse(self, x):
        return tuple(-a for a in x)

    def length(self, x) -> int:
        return sum(abs(a) for a in x)

    def distance(self, x, y) -> int:
        self.validate(x)
        self.validate(y)
        return sum(abs(a - b) for a, b in zip(x, y))

    def predicted_ball_size(self, R):
        return sum(lattice_sphere_size(self.n, k) for k in range(R + 1))

    def ball(self, R: int) -> Ball:
        if R < 0:
            raise InputError("radius must be non-negative")
        _check_capacity(self.predicted_ball_size(R), f"ball of radius {R} in {self.name}")
        items = []
        for v in itertools.product(range(-R, R + 1), repeat=self.n):
            k = sum(abs(a) for a in v)
            if k <= R:
                items.append((v, k))
        items.sort(key=lambda it: (it[1], it[0]))
        return _ball_from_lengths(self.identity, R, items)

    def distance_matrix(self, A, B=None):
        B = A if B is None else B
        a = np.asarray(A, dtype=float).reshape(len(A), self.n)
        b = np.asarray(B, dtype=float).reshape(len(B), self.n)
        out = np.zeros((len(A), len(B)))
        for i in range(self.n):
            out += np.abs(a[:, i][:, None] - b[:, i][None, :])
        return out

    def paired_distances(self, A, B):
        a = np.asarray(A, dtype=float).reshape(len(A), self.n)
        b = np.asarray(B, dtype=float).reshape(len(B), self.n)
        return np.abs(a - b).sum(axis=1)

    def format_point(self, x):
        return ";".join(str(c) for c in x)

    def parse_point(self, s):
        try:
            return tuple(int(c) for c in s.replace(",", ";").split(";"))
        except ValueError as exc:
            raise InputError(f"bad lattice point {s!r}") from exc


def heisenberg_multiply(p, q):
    return (p[0] + q[0], p[1] + q[1], p[2] + q[2] + p[0] * q[1])


@lru_cache(maxsize=8)
def _heisenberg_bfs(R: int):
    gens = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0))
    e = (0, 0, 0)
    table = {e: 0}
    items = [(e, 0)]
    frontier = [e]
    for r in range(1, R + 1):
        nxt = []
        for p in frontier:
            for g in gens:
                q = heisenberg_multiply(p, g)
                if q not in table:
                    table[q] = r
                    nxt.append(q)
        items.extend((q, r) for q in nxt)
        frontier = nxt
    return table, tuple(items)


def heisenberg_length_table(R: int, cap: int | None = None) -> dict:
    """Exact word lengths of all Heisenberg elements of length at most ``R``.

    Elements are triples ``(x, y, z)`` meaning ``c^z b^y a^x``-style normal
    coordinates with product ``(x, y, z)(x', y', z') = (x+x', y+y', z+z'+xy')``;
    the generators are ``a = (1,0,0)``, ``b = (0,1,0)`` and ``[a,b] = (0,0,1)``.
    """
    cap = heisenberg_cap() if cap is None else cap
    if R < 0:
        raise InputError("radius must be non-negative")
    if R > cap:
        raise CapacityError(f"Heisenberg table radius {R} exceeds cap {cap}", predicted=R, cap=cap)
    return _heisenberg_bfs(R)[0]


class HeisenbergZ(GroupSpec):
    """Discrete Heisenberg group with generators a, b; c = [a, b] is central."""

    name = "H3"

    def __init__(self, cap: int | None = None):
        self.cap = heisenberg_cap() if cap is None else cap

    @property
    def generators(self):
        return ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0))

    @property
    def identity(self):
        return (0, 0, 0)

    def validate(self, x):
        if not (isinstance(x, tuple) and len(x) == 3):
            raise InputError(f"{x!r} is not a Heisenberg triple")

    def multiply(self, x, y):
        return heisenberg_multiply(x, y)

    def inverse(self, x):
        return (-x[0], -x[1], x[0] * x[1] - x[2])

    def length(self, x) -> int:
        table = heisenberg_length_table(self.cap, cap=self.cap)
        try:
            return table[x]
        except KeyError:
            lower = abs(x[0]) + abs(x[1])
            required = max(self.cap + 1, lower)
            raise OutOfRangeError(
                f"{x} lies outside the length table of radius {self.cap}; "
                f"a table of radius at least {required} is required",
                required_radius=required,
                cap=self.cap,
            ) from None

    def ball(self, R: int) -> Ball:
        if R > self.cap:
            raise CapacityError(f"Heisenberg ball radius {R} exceeds cap {self.cap}", predicted=R, cap=self.cap)
        items = _heisenberg_bfs(R)[1]
        _check_capacity(len(items), f"Heisenberg ball of radius {R}")
        return _ball_from_lengths(self.identity, R, items)

    def format_point(self, x):
        return ";".join(str(c) for c in x)

    def parse_point(self, s):
        p = LatticeZn(3).parse_point(s)
        if len(p) != 3:
            raise InputError(f"bad Heisenberg point {s!r}")
        return p


def central_power(m: int) -> tuple:
    """The element c^m = [a, b]^m."""
    return (0, 0, m)


class Product(GroupSpec):
    """Direct product with the sum metric."""

    def __init__(self, factors: Sequence[GroupSpec]):
        if not factors:
            raise ConfigError("product needs at least one factor")
        self.factors = tuple(factors)
        self.name = "x".join(f.name for f in self.factors)
        self.is_group = all(f.is_group for f in self.factors)

    @property
    def generators(self):
        gens = []
        for i, f in enumerate(self.factors):
            for g in f.generators:
                p = [h.identity for h in self.factors]
                p[i] = g
                gens.append(tuple(p))
        return tuple(gens)

    @property
    def identity(self):
        return tuple(f.identity for f in self.factors)

    def validate(self, x):
        if not (isinstance(x, tuple) and len(x) == len(self.factors)):
            raise InputError(f"{x!r} is not a point of {self.name}")
        for f, c in zip(self.factors, x):
            f.validate(c)

    def multiply(self, x, y):
        return tuple(f.multiply(a, b) for f, a, b in zip(self.factors, x, y))

    def inverse(self, x):
        return tuple(f.inverse(a) for f, a in zip(self.factors, x))

    def length(self, x):
        return sum(f.length(a) for f, a in zip(self.factors, x))

    def distance(self, x, y):
        self.validate(x)
        self.validate(y)
        return sum(f.distance(a, b) for f, a, b in zip(self.factors, x, y))

    def predicted_ball_size(self, R):
        sizes = [1] + [0] * R
        for f in self.factors:
            if f.predicted_ball_size(R) is None:
                fs = list(f.ball(R).sphere_sizes)
            else:
                totals = [f.predicted_ball_size(n) for n in range(R + 1)]
                fs = [totals[0]] + [b - a for a, b in zip(totals, totals[1:])]
            sizes = [sum(sizes[i] * fs[n - i] for i in range(n + 1)) for n in range(R + 1)]
        return sum(sizes)

    def ball(self, R: int) -> Ball:
        if R < 0:
            raise InputError("radius must be non-negative")
        _check_capacity(self.predicted_ball_size(R), f"ball of radius {R} in {self.name}")
        factor_balls = [f.ball(R) for f in self.factors]
        items = [((), 0)]
        for fb in factor_balls:
            items = [
                (p + (q,), k + l)
                for p, k in items
                for q, l in zip(fb.points, fb.lengths)
                if k + l <= R
            ]
        items.sort(key=lambda it: it[1])
        return _ball_from_lengths(self.identity, R, items)

    def distance_matrix(self, A, B=None):
        B = A if B is None else B
        out = np.zeros((len(A), len(B)))
        for i, f in enumerate(self.factors):
            out += f.distance_matrix([a[i] for a in A], [b[i] for b in B])
        return out

    def paired_distances(self, A, B):
        out = np.zeros(len(A))
        for i, f in enumerate(self.factors):
            out += f.paired_distances([a[i] for a in A], [b[i] for b in B])
        return out

    def format_point(self, x):
        return "|".join(f.format_point(c) for f, c in zip(self.factors, x))

    def parse_point(self, s):
        parts = s.split("|")
        if len(parts) != len(self.factors):
            raise InputError(f"bad product point {s!r}")
        return tuple(f.parse_point(p) for f, p in zip(self.factors, parts))


class PointCloud(GroupSpec):
    """A finite metric space given by a distance matrix; points are indices.

    Not a group: ``ball`` enumerates points around ``center`` and lengths
    are distances to the center rounded up to integers.
    """

    is_group = False

    def __init__(self, name: str, dist: np.ndarray, coords: np.ndarray | None = None, center: int = 0):
        dist = np.asarray(dist, dtype=float)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise InputError("distance matrix must be square")
        if not np.allclose(dist, dist.T) or np.any(np.diag(dist) != 0):
            raise InputError("distance matrix must be symmetric with zero diagonal")
        self.name = name
        self.dist = dist
        self.coords = None if coords is None else np.asarray(coords, dtype=float)
        self.center = center

    @classmethod
    def from_coords(cls, name: str, coords) -> "PointCloud":
        c = np.asarray(coords, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=-1))
        return cls(name, d, coords=c)

    def __len__(self):
        return self.dist.shape[0]

    @property
    def generators(self):
        return ()

    @property
    def identity(self):
        return self.center

    def validate(self, x):
        if not (isinstance(x, (int, np.integer)) and 0 <= x < len(self)):
            raise InputError(f"{x!r} is not an index of point cloud {self.name}")

    def distance(self, x, y):
        self.validate(x)
        self.validate(y)
        return float(self.dist[x, y])

    def length(self, x):
        return int(math.ceil(self.dist[self.center, x]))

    def ball(self, R: int) -> Ball:
        items = [(i, int(math.ceil(self.dist[self.center, i]))) for i in range(len(self))]
        items = sorted((it for it in items if it[1] <= R), key=lambda it: (it[1], it[0]))
        return _ball_from_lengths(self.center, R, items)

    def all_points(self) -> list[int]:
        return list(range(len(self)))

    def distance_matrix(self, A, B=None):
        B = A if B is None else B
        return self.dist[np.ix_(list(A), list(B))]

    def format_point(self, x):
        if self.coords is not None:
            return ";".join(repr(float(c)) for c in self.coords[x])
        return str(x)

    def parse_point(self, s):
        return int(s)


# -- CSV interfaces -----------------------------------------------------------

def ball_csv(space: GroupSpec, ball: Ball) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "word_or_coords", "length"])
    for i, (p, k) in enumerate(zip(ball.points, ball.lengths)):
        w.writerow([i, space.format_point(p), k])
    return buf.getvalue()


def growth_csv(ball: Ball) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "sigma"])
    w.writerows(ball.growth_rows())
    return buf.getvalue()


def read_point_cloud(path: str, name: str | None = None) -> PointCloud:
    """Load ``id,coord...`` rows or an ``i,j,d`` distance list."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise InputError(f"{path}: empty point cloud")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    name = name or os.path.splitext(os.path.basename(path))[0]
    if header[:3] == ["i", "j", "d"]:
        entries = [(int(r[0]), int(r[1]), float(r[2])) for r in body]
        n = 1 + max(max(i, j) for i, j, _ in entries)
        dist = np.full((n, n), np.nan)
        np.fill_diagonal(dist, 0.0)
        for i, j, d in entries:
            dist[i, j] = dist[j, i] = d
        if np.isnan(dist).any():
            raise InputError(f"{path}: distance list is incomplete")
        return PointCloud(name, dist)
    if header[0] != "id":
        raise InputError(f"{path}: expected header 'id,coord...' or 'i,j,d'")
    body.sort(key=lambda r: int(r[0]))
    coords = np.array([[float(c) for c in r[1:]] for r in body])
    return PointCloud.from_coords(name, coords)


def write_distance_csv(cloud: PointCloud) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "d"])
    n = len(cloud)
    for i in range(n):
        for j in range(i + 1, n):
            d = cloud.dist[i, j]
            w.writerow([i, j, int(d) if float(d).is_integer() else repr(float(d))])
    return buf.getvalue()


def write_coords_csv(cloud: PointCloud) -> str:
    if cloud.coords is None:
        raise ConfigError("point cloud has no coordinates")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id"] + [f"x{k}" for k in range(cloud.coords.shape[1])])
    for i, c in enumerate(cloud.coords):
        w.writerow([i] + [repr(float(v)) for v in c])
    return buf.getvalue()


# -- spec strings ---------------------------------------------------------------

def _split_top(s: str) -> list[str]:
    parts, depth, cur = [], 0, ""
    for ch in s:
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    parts.append(cur)
    return [p.strip() for p in parts]


def _params(s: str) -> tuple[str, dict[str, str]]:
    head, *rest = s.split(":")
    params = {}
    for item in rest:
        if "=" not in item:
            raise InputError(f"bad parameter {item!r} in {s!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = v.strip()
    return head.strip().lower(), params


def parse_group(s: str) -> GroupSpec:
    """Parse strings such as ``f2``, ``f2:gens=ab+aB`` (extra generators), ``z``, ``zn:n=3``, ``heis``, ``prod(z,f2)``."""
    s = s.strip()
    if s.lower().startswith("prod(") and s.endswith(")"):
        return Product([parse_group(p) for p in _split_top(s[5:-1])])
    head, params = _params(s)
    try:
        if head in ("f2", "free") or (head.startswith("f") and head[1:].isdigit()):
            rank = int(params.get("rank", head[1:] if head[1:].isdigit() else 2))
            extra = [g for g in params.get("gens", "").split("+") if g]
            return FreeGroup(rank, extra)
        if head == "z":
            return LatticeZn(1)
        if head == "zn" or (head.startswith("z") and head[1:].isdigit()):
            return LatticeZn(int(params.get("n", head[1:] or 1)))
        if head in ("heis", "heisenberg", "h3"):
            return HeisenbergZ(cap=int(params["cap"]) if "cap" in params else None)
    except ValueError as exc:
        raise InputError(f"bad group spec {s!r}: {exc}") from exc
    raise InputError(f"unknown group spec {s!r}")
