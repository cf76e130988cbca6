"""Command-line entry point.

Every subcommand prints a JSON report on stdout (or to ``--report``),
writes CSV tables where asked, and can render a figure with ``--plot``.
Exit status: 0 when every check passes, 1 when one fails, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from . import __version__
from . import coarse, compression, equivariant, kernels
from .embeddings import parse_embedding
from .errors import CapacityError, ConfigError, DomainError, EstimationError, HSCompressError, HypothesisError, InputError
from .fixtures import SAMPLES, write_fixtures
from .reports import FAIL, PASS, dumps, to_jsonable
from .spaces import ball_csv, growth_csv, parse_group, read_point_cloud

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(HSCompressError):
    pass


def _write(path: str | None, text: str) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)


def _window(s: str | None):
    if not s:
        return None
    try:
        lo, hi = (int(x) for x in s.split(","))
    except ValueError as exc:
        raise UsageError(f"window must look like LO,HI: {s!r}") from exc
    return lo, hi


def _positive(name: str, value, allow_zero: bool = False):
    if value is None:
        return
    if value < 0 or (value == 0 and not allow_zero):
        raise UsageError(f"--{name} must be {'non-negative' if allow_zero else 'positive'}")


# -- subcommands -------------------------------------------------------------------

def cmd_ball(a):
    _positive("radius", a.radius, allow_zero=True)
    G = parse_group(a.group)
    b = G.ball(a.radius)
    _write(a.out, ball_csv(G, b))
    _write(a.growth, growth_csv(b))
    if a.plot:
        from .plotting import plot_growth

        plot_growth(b, a.plot)
    res = {"group": G.name, "radius": a.radius, "size": len(b), "sphere_sizes": list(b.sphere_sizes), "strategy": "exact"}
    return res, {}


def cmd_profile(a):
    _positive("radius", a.radius)
    G = parse_group(a.group)
    E = parse_embedding(a.embedding)
    r_max = a.r_max if a.r_max else 2 * a.radius
    prof = compression.compression_profile(
        G, E, r_max, strategy=a.strategy, seed=a.seed, samples=a.samples, threads=a.threads, radius=a.radius
    )
    _write(a.out, prof.to_csv())
    est = compression.asymptotic_compression(prof, _window(a.window))
    if a.plot:
        from .plotting import plot_profile

        plot_profile(prof, a.plot, est)
    return {"profile": prof.to_dict(), "estimate": est.to_dict()}, {}


def _read_profile(path: str) -> compression.CompressionProfile:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InputError(f"{path}: empty profile")
    try:
        r = np.array([int(x["r"]) for x in rows])
        rho = np.array([float(x["rho"]) for x in rows])
        rp = np.array([float(x["rho_plus"]) for x in rows])
        n = np.array([int(x["pairs"]) for x in rows])
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: expected columns r,rho,rho_star,rho_plus,pairs") from exc
    return compression.CompressionProfile(r, rho, rp, n, strategy=f"csv:{path}")


def cmd_estimate(a):
    prof = _read_profile(a.profile)
    est = compression.asymptotic_compression(prof, _window(a.window))
    if a.plot:
        from .plotting import plot_profile

        plot_profile(prof, a.plot, est)
    return {"estimate": est.to_dict()}, {}


def _parse_checks(s: str) -> list[tuple[str, dict]]:
    out = []
    for item in s.split(","):
        item = item.strip()
        if not item:
            continue
        head, *rest = item.split(":")
        params = {}
        for kv in rest:
            if "=" not in kv:
                raise UsageError(f"bad check parameter {kv!r}")
            k, v = kv.split("=", 1)
            params[k] = float(v)
        if head not in ("psd", "schur", "width", "convergence"):
            raise UsageError(f"unknown check {head!r}")
        out.append((head, params))
    return out


def cmd_kernel(a):
    _positive("radius", a.radius, allow_zero=True)
    _positive("k", a.k)
    G = parse_group(a.group)
    E = parse_embedding(a.embedding)
    ball = G.ball(a.radius)
    u = kernels.schoenberg_kernel(E, a.k, ball, G)
    _write(a.dump, u.to_csv())
    res: dict = {"points": len(u), "k": a.k, "embedding": E.describe(), "normalized": u.normalized, "note": kernels.DESK_NOTE}
    verdicts = {}
    for name, p in _parse_checks(a.checks):
        if name == "psd":
            lo, ok = kernels.psd_check(u, p.get("tol", 1e-8))
            res["psd"] = {"min_eig": lo, "verdict": PASS if ok else FAIL, "strategy": "exact eigensolver"}
            verdicts["psd"] = ok
        elif name == "schur":
            kappa = p.get("kappa", 1.0 / a.k)
            uk = kernels.kappa_kernel(E, kappa, ball, G)
            r0 = int(p["r0"]) if "r0" in p else None
            try:
                reps = kernels.schur_suite(uk, p.get("eps", 0.5), kappa, r0)
            except HypothesisError as exc:
                res["schur"] = {"verdict": FAIL, "hypothesis_violated_at": exc.r, "error": str(exc)}
                verdicts["schur"] = False
                continue
            res["schur"] = {"truncations": [r.to_dict() for r in reps], "verdict": PASS if all(r.passed for r in reps) else FAIL, "strategy": "exact row sums"}
            verdicts["schur"] = all(r.passed for r in reps)
            if a.plot:
                from .plotting import plot_schur

                plot_schur(reps, a.plot.replace(".png", "") + "_schur.png")
        elif name == "width":
            ws = [int(p.get("w", 2))]
            rep = kernels.width_sweep(u, ws)[0]
            res["width"] = rep.to_dict()
            verdicts["width"] = rep.passed
        elif name == "convergence":
            strip = p.get("strip", 3.0)
            ks = [a.k * 2**j for j in range(int(p.get("steps", 4)))]
            seq = [kernels.schoenberg_kernel(E, k, ball, G) for k in ks]
            rep = kernels.convergence_support_check(seq, strip)
            res["convergence"] = rep.to_dict()
            verdicts["convergence"] = rep.passed
    if a.plot and any(n == "width" for n, _ in _parse_checks(a.checks)):
        from .plotting import plot_width_sweep

        top = int(u.diameter)
        plot_width_sweep(kernels.width_sweep(u, range(0, top + 1, 2)), a.plot)
    return res, verdicts


def cmd_qgcheck(a):
    cloud = read_point_cloud(a.points)
    w = coarse.check_quasi_geodesic(cloud.dist, a.lam, a.delta)
    res = w.to_dict()
    res["points"] = len(cloud)
    if a.plot:
        from .plotting import plot_distances

        iu = np.triu_indices(len(cloud), k=1)
        plot_distances(cloud.dist[iu], cloud.dist[iu], a.plot, "point cloud distances")
    return res, {"quasi-geodesic": w.passed}


def _sample(a) -> coarse.MapSample:
    if a.fixture:
        if a.fixture not in SAMPLES:
            raise UsageError(f"unknown fixture {a.fixture!r}; choose from {sorted(SAMPLES)}")
        return SAMPLES[a.fixture]()
    if not (a.source and a.target):
        raise UsageError("give --fixture or both --source and --target")
    X = read_point_cloud(a.source)
    Y = read_point_cloud(a.target)
    if len(X) != len(Y):
        raise InputError("source and target clouds must list the same number of points (row i maps to row i)")
    return coarse.MapSample(f"{X.name}->{Y.name}", X.dist, Y.dist)


def _plot_sample(a, s):
    if a.plot:
        from .plotting import plot_distances

        dX, dY, _ = s.pairs()
        plot_distances(dX, dY, a.plot, s.name)


def cmd_qicheck(a):
    s = _sample(a)
    rep = coarse.check_quasi_isometry(s, K=a.K, C=a.C, D=a.D, D_max=a.D_max)
    _plot_sample(a, s)
    return rep.to_dict(), {"quasi-isometry": rep.passed}


def cmd_uecheck(a):
    s = _sample(a)
    cls = coarse.classify_map(s, r_max=a.r_max)
    _plot_sample(a, s)
    return cls, {"uniform-embedding": cls["uniform_embedding"] == PASS}


def cmd_cocycle(a):
    pairs = equivariant.random_pairs(a.seed, a.samples, a.radius)
    resid = equivariant.verify_cocycle(pairs)
    est = equivariant.equivariant_compression(a.r_max, seed=a.seed)
    res = {
        "max_residual": resid,
        "pairs": a.samples,
        "radius": a.radius,
        "rho_profile": est.to_dict(),
        "slope": est.slope,
        "sqrt_exact": equivariant.sqrt_profile_exact(est),
    }
    ok = resid <= 1e-12 and est.consistent
    return res, {"cocycle": ok}


def cmd_product(a):
    rep = compression.product_check(parse_embedding(a.f), parse_embedding(a.g), parse_group(a.x), parse_group(a.y), 2 * a.radius)
    return rep.to_dict(), {"product": rep.passed}


def cmd_compose(a):
    rep = compression.composition_check(parse_embedding(a.outer), parse_embedding(a.inner), parse_group(a.group), 2 * a.radius)
    return rep.to_dict(), {"composition": rep.passed}


def cmd_fixtures(a):
    return {"written": write_fixtures(a.out)}, {}


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hscompress", description="Hilbert space compression toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        sp.add_argument("--report", help="write the JSON report here instead of stdout")
        sp.add_argument("--plot", help="render a PNG figure to this path")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--seed", type=int, default=0)
        return sp

    sp = add("ball", cmd_ball, "enumerate a ball")
    sp.add_argument("--group", required=True)
    sp.add_argument("--radius", type=int, required=True)
    sp.add_argument("--out", help="ball CSV")
    sp.add_argument("--growth", help="growth CSV")

    sp = add("profile", cmd_profile, "compression profile and tail estimate")
    sp.add_argument("--group", required=True)
    sp.add_argument("--embedding", required=True)
    sp.add_argument("--radius", type=int, required=True, help="ball radius R; pairs reach distance 2R")
    sp.add_argument("--r-max", dest="r_max", type=int, help="profile grid end (default 2R)")
    sp.add_argument("--strategy", default="auto", choices=["auto", "exact-pairwise", "tree-closed-form", "sampled"])
    sp.add_argument("--samples", type=int, default=compression.DEFAULT_SAMPLES)
    sp.add_argument("--window", help="LO,HI")
    sp.add_argument("--out", help="profile CSV")

    sp = add("estimate", cmd_estimate, "estimate from a profile CSV")
    sp.add_argument("--profile", required=True)
    sp.add_argument("--window", help="LO,HI")

    sp = add("kernel", cmd_kernel, "Schoenberg kernel checks")
    sp.add_argument("--group", required=True)
    sp.add_argument("--embedding", required=True)
    sp.add_argument("--radius", type=int, required=True)
    sp.add_argument("--k", type=float, required=True)
    sp.add_argument("--checks", default="psd", help="comma list: psd, schur:kappa=..:eps=..:r0=.., width:w=.., convergence:strip=..")
    sp.add_argument("--dump", help="kernel CSV (i,j,value upper triangle)")

    sp = add("qgcheck", cmd_qgcheck, "quasi-geodesic check of a point cloud")
    sp.add_argument("--points", required=True)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--delta", type=float, required=True)

    for name, fn, help_ in (("qicheck", cmd_qicheck, "quasi-isometry fit or verification"), ("uecheck", cmd_uecheck, "uniform embedding and Lipschitz classification")):
        sp = add(name, fn, help_)
        sp.add_argument("--fixture", help=f"one of {', '.join(sorted(SAMPLES))}")
        sp.add_argument("--source", help="source point cloud CSV")
        sp.add_argument("--target", help="target point cloud CSV, row i is the image of source row i")
        if name == "qicheck":
            sp.add_argument("--C", type=float)
            sp.add_argument("--D", type=float)
            sp.add_argument("--K", type=float)
            sp.add_argument("--D-max", dest="D_max", type=float)
        else:
            sp.add_argument("--r-max", dest="r_max", type=int)

    sp = add("cocycle-check", cmd_cocycle, "tree cocycle identity and equivariant compression")
    sp.add_argument("--radius", type=int, default=8)
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--r-max", dest="r_max", type=int, default=16)

    sp = add("product-check", cmd_product, "direct-sum compression inequality")
    sp.add_argument("--f", required=True)
    sp.add_argument("--g", required=True)
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--radius", type=int, required=True)

    sp = add("compose-check", cmd_compose, "composition compression inequality")
    sp.add_argument("--outer", required=True)
    sp.add_argument("--inner", required=True)
    sp.add_argument("--group", required=True)
    sp.add_argument("--radius", type=int, required=True)

    sp = add("fixtures", cmd_fixtures, "write fixture point clouds")
    sp.add_argument("--out", default="fixtures")
    return p


def run(argv=None) -> tuple[int, dict]:
    parser = build_parser()
    a = parser.parse_args(argv)
    config = {k: v for k, v in vars(a).items() if k not in ("fn", "report", "plot")}
    t0 = time.perf_counter()
    try:
        if a.threads < 1:
            raise UsageError("--threads must be at least 1")
        results, verdicts = a.fn(a)
    except (UsageError, InputError, ConfigError, DomainError, CapacityError, EstimationError) as exc:
        print(f"hscompress {a.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE, {}
    report = {
        "command": a.command,
        "config": config,
        "results": results,
        "verdicts": {k: PASS if v else FAIL for k, v in verdicts.items()},
        "version": __version__,
        "timing": round(time.perf_counter() - t0, 3),
    }
    text = dumps(to_jsonable(report))
    if a.report:
        _write(a.report, text + "\n")
    else:
        print(text)
    return (EXIT_OK if all(verdicts.values()) else EXIT_FAIL), report


def main(argv=None) -> int:
    return run(argv)[0]


if __name__ == "__main__":
    sys.exit(main())
