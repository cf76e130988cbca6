"""Ready-made map samples for the coarse-geometry examples.

Each builder returns a :class:`MapSample`; ``write_fixtures`` dumps the
point clouds as CSV so the CLI can read them back.
"""
from __future__ import annotations

import math
import os

import numpy as np

from .coarse import MapSample
from .spaces import FreeGroup, HeisenbergZ, PointCloud, central_power, write_coords_csv, write_distance_csv


def _euclid(a, b) -> float:
    return math.dist(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,))


def ex0_f_points(N: int) -> list[tuple]:
    pts = []
    for n in range(1, N + 1):
        pts += [(float(n), 1.0 / n), (float(n), 0.0)]
    return pts


def ex0_f(p: tuple) -> tuple:
    return (p[0], 1.0) if p[1] > 0 else (p[0], 0.0)


def ex0_f_sample(N: int = 40) -> MapSample:
    """``(n, 1/n) -> (n, 1)``, ``(n, 0) -> (n, 0)`` inside the plane."""
    pts = ex0_f_points(N)
    return MapSample.from_map("ex0-f", pts, ex0_f, _euclid, _euclid, extent=[p[0] for p in pts])


def ex0_g_sample(N: int = 40) -> MapSample:
    """``y -> y**2`` on the squares ``{n**2}``."""
    pts = [float(n * n) for n in range(1, N + 1)]
    return MapSample.from_map("ex0-g", pts, lambda y: y * y, _euclid, _euclid, extent=pts)


def dilation_sample(N: int = 50, factor: int = 2) -> MapSample:
    pts = list(range(-N, N + 1))
    return MapSample.from_map(f"dilate-{factor}", pts, lambda n: factor * n, _euclid, _euclid, extent=[abs(n) for n in pts])


def isometry_sample(N: int = 50) -> MapSample:
    return dilation_sample(N, 1)


def constant_sample(N: int = 50) -> MapSample:
    pts = list(range(N + 1))
    return MapSample.from_map("constant", pts, lambda n: 0, _euclid, _euclid, extent=pts)


def coarse_eq_f(n: int) -> int:
    return 2 * n + (n % 2)


def coarse_eq_g(y: int) -> int:
    return y // 2


COARSE_EQ_K = 1


def coarse_eq_samples(N: int = 40) -> tuple[MapSample, MapSample, int]:
    """``f(n) = 2n + (n mod 2)`` on a segment of Z with coarse inverse ``g(y) = floor(y/2)``.

    ``g f = id`` and ``|f g (y) - y| <= 1``, so ``K = 1``.
    """
    xs = list(range(0, N + 1))
    ys = list(range(0, coarse_eq_f(N) + 1))
    sf = MapSample.from_map("coarse-eq-f", xs, coarse_eq_f, _euclid, _euclid, extent=xs)
    sg = MapSample.from_map("coarse-eq-g", ys, coarse_eq_g, _euclid, _euclid, extent=ys)
    return sf, sg, COARSE_EQ_K


def heis_center_cloud(M: int = 12, cap: int | None = None) -> PointCloud:
    """The powers ``c**0 .. c**M`` of the central generator with the induced word metric."""
    H = HeisenbergZ(cap=cap)
    lengths = [H.length(central_power(m)) for m in range(M + 1)]
    idx = np.arange(M + 1)
    d = np.array(lengths, dtype=float)[np.abs(idx[:, None] - idx[None, :])]
    return PointCloud("heis-center", d)


def heis_center_sample(M: int = 12, cap: int | None = None) -> MapSample:
    """``m -> c**m`` from ``{0..M}`` in Z into the Heisenberg group."""
    cloud = heis_center_cloud(M, cap)
    idx = np.arange(M + 1)
    dX = np.abs(idx[:, None] - idx[None, :]).astype(float)
    return MapSample("heis-center", dX, cloud.dist, extent=idx.astype(float), labels=list(range(M + 1)))


def f2_genset_sample(R: int = 4, extra: tuple = ("ab",)) -> MapSample:
    """Identity of F2 from the word metric of ``{a, b}`` to that of ``{a, b} + extra``."""
    std = FreeGroup(2)
    big = FreeGroup(2, extra_generators=extra)
    pts = list(std.ball(R).points)
    dX = std.distance_matrix(pts).astype(float)
    dY = np.asarray(big.distance_matrix(pts), dtype=float)
    return MapSample("f2-genset", dX, dY, extent=[len(p) for p in pts], labels=pts)


SAMPLES = {
    "ex0-f": ex0_f_sample,
    "ex0-g": ex0_g_sample,
    "dilate": dilation_sample,
    "isometry": isometry_sample,
    "constant": constant_sample,
    "heis-center": heis_center_sample,
    "f2-genset": f2_genset_sample,
    "coarse-eq-f": lambda: coarse_eq_samples()[0],
    "coarse-eq-g": lambda: coarse_eq_samples()[1],
}


def write_fixtures(directory: str) -> list[str]:
    """Write the fixture point clouds; returns the paths written."""
    os.makedirs(directory, exist_ok=True)
    out = []

    def put(name, text):
        path = os.path.join(directory, name)
        with open(path, "w") as fh:
            fh.write(text)
        out.append(path)

    put("heis_center.csv", write_distance_csv(heis_center_cloud()))
    pts = ex0_f_points(20)
    put("ex0_X.csv", write_coords_csv(PointCloud.from_coords("ex0-X", pts)))
    put("ex0_fX.csv", write_coords_csv(PointCloud.from_coords("ex0-fX", [ex0_f(p) for p in pts])))
    squares = [float(n * n) for n in range(1, 21)]
    put("ex0_Y.csv", write_coords_csv(PointCloud.from_coords("ex0-Y", squares)))
    put("ex0_gY.csv", write_coords_csv(PointCloud.from_coords("ex0-gY", [y * y for y in squares])))
    zs = list(range(0, 41))
    put("z_segment.csv", write_coords_csv(PointCloud.from_coords("z", zs)))
    put("z_doubled.csv", write_coords_csv(PointCloud.from_coords("2z", [2 * n for n in zs])))
    return out
