"""Command line interface: ``wulffcell <command> [options]``.

Exit codes: 0 success, 1 a self-test check failed, 2 invalid input, 3 an
iterative solver did not converge.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from .errors import InputError, WulffcellError

DEFAULT_SEED = 7


# ----------------------------------------------------------------------
# helpers


def _floats(text, n=None):
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from exc
    if n is not None and len(vals) != n:
        raise InputError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _ints(text, n):
    vals = _floats(text, n)
    if any(v != int(v) for v in vals):
        raise InputError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _seed(args):
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get("WULFFCELL_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise InputError(f"WULFFCELL_SEED must be an integer, got {env!r}") from exc
    return DEFAULT_SEED


def _load_source(args):
    """A PeriodicGraph from --graph, --weights or --preset."""
    from .lattice import load_graph
    from .presets import nearest_neighbour, optab2_graph
    from .saddle import load_weights, optimal_t2_weights

    given = [x for x in (args.graph, args.weights, args.preset) if x]
    if len(given) != 1:
        raise InputError("give exactly one of --graph, --weights, --preset")
    if args.graph:
        return load_graph(args.graph), None
    if args.weights:
        wf = load_weights(args.weights)
        return wf.to_graph(), wf
    if args.preset == "nn":
        return nearest_neighbour(), None
    return optab2_graph(), optimal_t2_weights()


def _add_source(p):
    p.add_argument("--graph", help="periodic graph JSON")
    p.add_argument("--weights", help="grid weight field JSON")
    p.add_argument("--preset", choices=["nn", "optab2"], help="built-in graph")


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions():
    import matplotlib
    import scipy

    return {"wulffcell": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__}


def _write_manifest(args, outputs, seed, wall):
    target = args.manifest
    if target is None and outputs:
        target = outputs[0] + ".manifest.json"
    if target is None:
        return None
    config = {k: v for k, v in vars(args).items() if k not in ("func", "manifest")}
    manifest = {
        "command": args.command,
        "config": config,
        "seed": seed,
        "versions": _versions(),
        "wall_time": wall,
        "outputs": {p: _digest(p) for p in outputs},
    }
    with open(target, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return target


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)


# ----------------------------------------------------------------------
# commands


def cmd_phi(args, seed):
    from .cell import phi_lp
    from .saddle import phi_grid

    g, wf = _load_source(args)
    nu = _floats(args.nu)
    if args.eps is not None:
        if wf is None:
            raise InputError("--eps needs grid weights (--weights or --preset optab2)")
        sol = phi_grid(wf, nu, eps=args.eps, tol=args.tol)
        result = {"nu": nu, "eps": args.eps, "phi": sol.value, "gap": sol.state.gap}
    else:
        sol = phi_lp(g, nu)
        result = {"nu": nu, "phi": sol.value}
    print(repr(result["phi"]))
    outputs = []
    if args.out:
        result["corrector"] = np.asarray(sol.corrector.values).tolist()
        _dump_json(result, args.out)
        outputs.append(args.out)
    return 0, outputs


def cmd_wulff(args, seed):
    from .wulff import wulff_approximate, wulff_polytope_2d

    g, _ = _load_source(args)
    if g.dim == 2 and not args.approximate:
        poly = wulff_polytope_2d(g)
    else:
        poly = wulff_approximate(g, n_directions=args.samples, seed=seed)
    info = poly.to_dict()
    print(f"vertices: {len(poly.vertices)}  stored edges N={poly.n_edges} "
          f"(undirected {poly.n_edges_undirected})  within 3^N: {poly.within_bound}"
          f"{'  [approximate]' if poly.approximate else ''}")
    outputs = []
    if args.out:
        _dump_json(info, args.out)
        outputs.append(args.out)
    if args.svg:
        if g.dim != 2:
            raise InputError("SVG output is only available in two dimensions")
        from .plotting import plot_wulff

        plot_wulff(poly, args.svg)
        outputs.append(args.svg)
    return 0, outputs


def cmd_frank(args, seed):
    from .wulff import anisotropy_error, frank_diagram

    g, _ = _load_source(args)
    fd = frank_diagram(g, args.k)
    err = anisotropy_error(fd)
    print(f"anisotropy_error: {err!r}  min phi: {float(fd.values.min())!r}  "
          f"max phi: {float(fd.values.max())!r}")
    outputs = []
    if args.csv:
        fd.write_csv(args.csv)
        outputs.append(args.csv)
    if args.svg:
        from .plotting import plot_frank

        plot_frank(fd, args.svg, title=f"anisotropy {err:.4f}")
        outputs.append(args.svg)
    return 0, outputs


def cmd_optimize(args, seed):
    from .aniso_opt import OptimizeConfig, config_dict, optimize
    from .saddle import load_weights, save_weights

    cfg = OptimizeConfig(period=args.T, k=args.k, eps=args.eps,
                         eps_start=max(args.eps_start, args.eps), step=args.step,
                         max_iter=args.iters, restarts=args.restarts, seed=seed,
                         c_lo=args.c_lo, c_hi=args.c_hi, symmetrize=args.symmetrize,
                         k_eval=args.k_eval).validate()
    init = load_weights(args.init) if args.init else None
    wf, trace = optimize(cfg, init=init)
    best = trace.best
    print(f"best restart {trace.best_restart}: anisotropy_error(k={cfg.k_eval}) = "
          f"{best.anisotropy!r}, on the {cfg.k} training directions = {best.anisotropy_train!r}")
    if trace.warning:
        print("warning: every restart ended on a failed line search", file=sys.stderr)
    outputs = []
    if args.out:
        save_weights(wf, args.out)
        outputs.append(args.out)
        summary = {"config": config_dict(cfg), **trace.summary()}
        path = args.out + ".summary.json"
        _dump_json(summary, path)
        outputs.append(path)
    if args.trace:
        trace.write_csv(args.trace)
        outputs.append(args.trace)
    if args.svg:
        from .plotting import plot_frank
        from .wulff import frank_diagram

        plot_frank(frank_diagram(wf, cfg.k_eval), args.svg,
                   title=f"T={cfg.period}, anisotropy {best.anisotropy:.4f}")
        outputs.append(args.svg)
    return 0, outputs


def _load_image(path):
    from .imaging import read_csv, read_pgm

    if path.lower().endswith(".csv"):
        return read_csv(path)
    return read_pgm(path)


def _save_image(path, u):
    from .imaging import write_csv, write_pgm

    if path.lower().endswith(".csv"):
        write_csv(path, u)
    else:
        write_pgm(path, u)


def _weights_or_unit(path):
    from .saddle import WeightField2D, load_weights

    return load_weights(path) if path else WeightField2D.uniform(1, 1.0)


def cmd_denoise(args, seed):
    from .imaging import (Quadratic, TVProblem, default_mu, gaussian_noise, rof_denoise,
                          rof_objective, step_image)

    outputs = []
    if args.input:
        f = _load_image(args.input).values
    else:
        clean = step_image((args.size, args.size))
        f = gaussian_noise(clean, args.noise, seed)
        if args.noisy:
            _save_image(args.noisy, f)
            outputs.append(args.noisy)
    mu = args.mu if args.mu is not None else default_mu(f)
    p = TVProblem(_weights_or_unit(args.weights), Quadratic(f, mu))
    u, rep = rof_denoise(p, tol=args.tol, max_iter=args.max_iter)
    print(f"iterations: {rep.iterations}  gap: {rep.gap:.3e}  objective: "
          f"{rof_objective(p, u)!r} (input {rof_objective(p, f)!r})  mu: {mu!r}")
    if args.out:
        _save_image(args.out, u)
        outputs.append(args.out)
    if args.history:
        with open(args.history, "w") as fh:
            fh.write("iteration,objective,gap\n")
            for it, obj, gap in rep.history:
                fh.write(f"{it},{obj!r},{gap!r}\n")
        outputs.append(args.history)
    if args.svg:
        from .plotting import plot_image

        plot_image(u, args.svg, title="denoised")
        outputs.append(args.svg)
    return 0, outputs


def cmd_inpaint(args, seed):
    from .imaging import fit_orientation, inpaint_halfplane, interface_points, orientation_error

    theta = math.radians(args.nu_angle)
    nu = (math.cos(theta), math.sin(theta))
    box = _ints(args.box, 4)
    res = inpaint_halfplane(_weights_or_unit(args.weights), nu, box, size=(args.size, args.size),
                            tol=args.tol, max_iter=args.max_iter)
    pts = interface_points(res.binary.values, res.binary.mask)
    normal, _ = fit_orientation(pts)
    err = orientation_error(normal, nu)
    print(f"iterations: {res.report.iterations}  gap: {res.report.gap:.3e}  "
          f"interface orientation error: {err:.3f} deg")
    outputs = []
    for path, img in ((args.out, res.relaxed), (args.binary, res.binary)):
        if path:
            _save_image(path, img)
            outputs.append(path)
    if args.svg:
        from .plotting import plot_image

        plot_image(res.binary, args.svg, title=f"orientation error {err:.2f} deg")
        outputs.append(args.svg)
    return 0, outputs


def cmd_check_duality(args, seed):
    from .duality import check_duality
    from .presets import random_graph

    if args.graph or args.weights or args.preset:
        graphs = [_load_source(args)[0]]
    else:
        rng = np.random.default_rng(seed)
        graphs = [random_graph(rng, max_edges=40) for _ in range(args.random)]
    reports = []
    for k, g in enumerate(graphs):
        rep = check_duality(g, samples=args.samples, seed=seed + k)
        reports.append(rep)
        print(f"graph {k}: T={g.period} N={g.n_edges} max gap {rep['max_gap']:.3e} "
              f"flows admissible: {rep['flows_admissible']}")
    outputs = []
    if args.out:
        _dump_json(reports, args.out)
        outputs.append(args.out)
    ok = all(r["max_relative_gap"] <= 1e-8 and r["flows_admissible"] for r in reports)
    return (0 if ok else 1), outputs


def selftest_checks(seed=DEFAULT_SEED):
    """(name, passed, detail) for the exact-value battery."""
    from .cell import phi_lp
    from .duality import check_duality
    from .presets import nearest_neighbour, optab2_graph, random_graph
    from .wulff import anisotropy_error, frank_diagram, wulff_polytope_2d

    rng = np.random.default_rng(seed)
    out = []
    nn = nearest_neighbour()
    dirs = rng.standard_normal((32, 2))
    err = max(abs(phi_lp(nn, nu).value - 2 * np.abs(nu).sum()) for nu in dirs)
    out.append(("nearest neighbour phi = 2|nu|_1", err <= 1e-9, f"max error {err:.3e}"))
    err = max(abs(phi_lp(nn, nu).value - np.abs(nu).sum()) for nu in dirs)
    out.append(("nearest neighbour phi = |nu|_1", err <= 1e-9, f"max error {err:.3e}"))

    g2 = optab2_graph()
    s2 = math.sqrt(2)

    def st2(nu):
        a, b = nu
        return (s2 - 1) * (abs(a) + abs(b) + abs(a + b) / s2 + abs(a - b) / s2)

    th = 2 * np.pi * np.arange(64) / 64
    err = max(abs(phi_lp(g2, (math.cos(t), math.sin(t))).value - st2((math.cos(t), math.sin(t))))
              for t in th)
    out.append(("T=2 octagon weights match closed form", err <= 1e-8, f"max error {err:.3e}"))
    an = anisotropy_error(frank_diagram(g2, 180))
    ref = 1 / math.cos(math.pi / 8) - 1
    out.append(("T=2 anisotropy at k=180", abs(an - ref) <= 1e-4, f"{an:.6f} (closed form {ref:.6f})"))

    worst = 0.0
    for _ in range(3):
        rep = check_duality(random_graph(rng, max_edges=40), samples=10, seed=seed)
        worst = max(worst, rep["max_relative_gap"])
    out.append(("strong duality on random graphs", worst <= 1e-8, f"max relative gap {worst:.3e}"))

    poly = wulff_polytope_2d(nn)
    out.append(("nearest neighbour Wulff shape has 4 vertices", len(poly.vertices) == 4,
                f"vertices {np.round(poly.vertices, 9).tolist()}"))
    return out


def cmd_selftest(args, seed):
    rows = selftest_checks(seed)
    width = max(len(name) for name, _, _ in rows)
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    return (0 if all(ok for _, ok, _ in rows) else 1), []


# ----------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="wulffcell", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"wulffcell {__version__}")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for numerical libraries (recorded in the manifest)")
    p.add_argument("--manifest", help="manifest path (default: next to the first output)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phi", help="surface energy density in one direction")
    _add_source(s)
    s.add_argument("--nu", required=True, help="direction, e.g. 1,0")
    s.add_argument("--eps", type=float, help="regularized grid value instead of the exact LP")
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--out", help="JSON with value and corrector")
    s.set_defaults(func=cmd_phi)

    s = sub.add_parser("wulff", help="Wulff polytope")
    _add_source(s)
    s.add_argument("--out", help="polytope JSON")
    s.add_argument("--svg", help="figure")
    s.add_argument("--approximate", action="store_true", help="sampled hull (any dimension)")
    s.add_argument("--samples", type=int, default=200)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_wulff)

    s = sub.add_parser("frank", help="Frank diagram and anisotropy error")
    _add_source(s)
    s.add_argument("-k", type=int, default=180)
    s.add_argument("--csv", help="theta,phi,x,y table")
    s.add_argument("--svg", help="figure")
    s.set_defaults(func=cmd_frank)

    s = sub.add_parser("optimize", help="learn isotropic grid weights")
    s.add_argument("-T", type=int, default=2)
    s.add_argument("-k", type=int, default=8)
    s.add_argument("--eps", type=float, default=1e-4)
    s.add_argument("--eps-start", type=float, default=1e-2)
    s.add_argument("--step", type=float, default=0.05)
    s.add_argument("--iters", type=int, default=500, help="iteration cap per smoothing stage")
    s.add_argument("--restarts", type=int, default=5)
    s.add_argument("--seed", type=int)
    s.add_argument("--c-lo", type=float, default=0.01)
    s.add_argument("--c-hi", type=float, default=1.0)
    s.add_argument("--k-eval", type=int, default=180)
    s.add_argument("--symmetrize", action="store_true")
    s.add_argument("--init", help="weight JSON for the first restart")
    s.add_argument("--out", help="weights JSON")
    s.add_argument("--trace", help="trace CSV")
    s.add_argument("--svg", help="Frank diagram of the result")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("denoise", help="ROF denoising")
    s.add_argument("--in", dest="input", help="PGM or CSV image (default: noisy step demo)")
    s.add_argument("--weights", help="weight JSON (default: unit weights)")
    s.add_argument("--mu", type=float)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--max-iter", type=int, default=100_000)
    s.add_argument("--size", type=int, default=128, help="demo image size")
    s.add_argument("--noise", type=float, default=0.1, help="demo noise, fraction of range")
    s.add_argument("--seed", type=int)
    s.add_argument("--noisy", help="write the demo input here")
    s.add_argument("--out", help="PGM or CSV output")
    s.add_argument("--history", help="CSV of objective and gap per check")
    s.add_argument("--svg", help="figure")
    s.set_defaults(func=cmd_denoise)

    s = sub.add_parser("inpaint", help="minimal interface completion of a half-plane")
    s.add_argument("--nu-angle", type=float, default=67.5, help="degrees")
    s.add_argument("--weights", help="weight JSON (default: unit weights)")
    s.add_argument("--size", type=int, default=256)
    s.add_argument("--box", default="64,64,192,192", help="x0,y0,x1,y1 of the free region")
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--max-iter", type=int, default=200_000)
    s.add_argument("--out", help="relaxed solution (PGM or CSV)")
    s.add_argument("--binary", help="thresholded solution (PGM or CSV)")
    s.add_argument("--svg", help="figure")
    s.set_defaults(func=cmd_inpaint)

    s = sub.add_parser("check-duality", help="primal LP against the dual flow LP")
    _add_source(s)
    s.add_argument("--random", type=int, default=10, help="random graphs when no source is given")
    s.add_argument("--samples", type=int, default=20)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="JSON report")
    s.set_defaults(func=cmd_check_duality)

    s = sub.add_parser("selftest", help="exact-value checks")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 2 on usage errors, 0 for --help
        return int(exc.code or 0)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(args.threads))
    start = time.perf_counter()
    try:
        seed = _seed(args)
        code, outputs = args.func(args, seed)
        _write_manifest(args, outputs, seed, time.perf_counter() - start)
    except WulffcellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
