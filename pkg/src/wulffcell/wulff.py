"""Wulff polytope, Frank diagram and related diagnostics.

In two dimensions the Wulff shape is recovered exactly from the dual
flow LP: for two consecutive known vertices ``p_a``, ``p_b`` the support
value in the direction normal to ``[p_a, p_b]`` either equals the value on
the segment (the segment is an edge) or exposes a new vertex in between.
Every reported vertex is a moment attained by an optimal flow.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from .cell import phi_lp
from .duality import _HIGHS_OPTIONS, _incidence, dual_max
from .errors import InputError, NumericalDegeneracy
from .lattice import PeriodicGraph

MERGE_TOL = 1e-8


@dataclass
class WulffPolytope:
    dim: int
    vertices: np.ndarray
    intervals: list = field(default_factory=list)  # per vertex (theta_a, theta_b)
    n_edges: int = 0
    n_edges_undirected: int = 0
    approximate: bool = False

    @property
    def vertex_bound(self) -> int:
        return 3 ** self.n_edges

    @property
    def within_bound(self) -> bool:
        return len(self.vertices) <= self.vertex_bound

    def support(self, nu) -> float:
        return float(np.max(self.vertices @ np.asarray(nu, dtype=float)))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "vertices": self.vertices.tolist(),
            "intervals": [list(iv) for iv in self.intervals],
            "n_vertices": len(self.vertices),
            "n_edges": self.n_edges,
            "n_edges_undirected": self.n_edges_undirected,
            "vertex_bound_log3": self.n_edges,
            "within_bound": self.within_bound,
            "approximate": self.approximate,
        }


def _undirected_count(g: PeriodicGraph) -> int:
    keys = set()
    for e in g.edges:
        fwd = (e.src, e.dst, e.z)
        rev = (e.dst, e.src, tuple(-x for x in e.z))
        keys.add(min(fwd, rev))
    return len(keys)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def wulff_polytope_2d(g: PeriodicGraph, max_depth=60, merge_tol=MERGE_TOL,
                      initial_angles=8) -> WulffPolytope:
    """Vertices of the Wulff shape in counterclockwise order."""
    if g.dim != 2:
        raise InputError("the exact sweep is only available in two dimensions")

    def probe(theta):
        r = dual_max(g, (math.cos(theta), math.sin(theta)))
        return r.value, r.moment

    offset = 0.1234567
    pts = []
    for k in range(initial_angles):
        theta = offset + 2 * math.pi * k / initial_angles
        pts.append((theta, probe(theta)[1]))

    def refine(a, b, depth):
        (ta, pa), (tb, pb) = a, b
        if np.linalg.norm(pa - pb) <= merge_tol:
            return []
        if depth > max_depth:
            raise NumericalDegeneracy(f"vertex sweep did not resolve near angle {ta:.12f}")
        e = pb - pa
        n = np.array([e[1], -e[0]]) / np.linalg.norm(e)
        tn = math.atan2(n[1], n[0])
        while tn < ta:
            tn += 2 * math.pi
        while tn > tb:
            tn -= 2 * math.pi
        val, pn = probe(tn)
        if val <= float(n @ pa) + 1e-9 * (1.0 + abs(val)):
            return []
        mid = (tn, pn)
        return refine(a, mid, depth + 1) + [mid] + refine(mid, b, depth + 1)

    out = []
    for idx in range(len(pts)):
        a = pts[idx]
        b = pts[(idx + 1) % len(pts)]
        if idx == len(pts) - 1:
            b = (b[0] + 2 * math.pi, b[1])
        out.append(a)
        out.extend(refine(a, b, 0))

    # dedupe consecutive duplicates, then drop points interior to edges
    uniq = []
    for t, p in out:
        if not uniq or np.linalg.norm(uniq[-1][1] - p) > merge_tol:
            uniq.append((t, p))
    while len(uniq) > 1 and np.linalg.norm(uniq[0][1] - uniq[-1][1]) <= merge_tol:
        uniq.pop()
    verts = [p for _, p in uniq]
    if len(verts) >= 3:
        changed = True
        while changed and len(verts) >= 3:
            changed = False
            for k in range(len(verts)):
                o, a, b = verts[k - 1], verts[k], verts[(k + 1) % len(verts)]
                scale = max(1.0, np.linalg.norm(b - o) ** 2)
                if abs(_cross(o, a, b)) <= 1e-10 * scale:
                    del verts[k]
                    changed = True
                    break
    V = np.array(verts).reshape(-1, 2)

    intervals = []
    if len(V) >= 3:
        for k in range(len(V)):
            prev_e = V[k] - V[k - 1]
            next_e = V[(k + 1) % len(V)] - V[k]
            ta = math.atan2(-prev_e[0], prev_e[1])
            tb = math.atan2(-next_e[0], next_e[1])
            if tb < ta:
                tb += 2 * math.pi
            intervals.append((ta, tb))
    return WulffPolytope(dim=2, vertices=V, intervals=intervals, n_edges=g.n_edges,
                         n_edges_undirected=_undirected_count(g))


def wulff_approximate(g: PeriodicGraph, n_directions=200, seed=0) -> WulffPolytope:
    """Sampled support moments and their convex hull (any dimension).

    This is an inner approximation: every returned point is an attained
    moment, but vertices exposed only by unsampled directions are missed.
    """
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_directions, g.dim))
    moments = np.array([dual_max(g, nu).moment for nu in dirs])
    try:
        hull = ConvexHull(moments)
        V = moments[hull.vertices]
    except Exception:  # degenerate (lower-dimensional) hull
        V = np.unique(np.round(moments, 9), axis=0)
    return WulffPolytope(dim=g.dim, vertices=V, n_edges=g.n_edges,
                         n_edges_undirected=_undirected_count(g), approximate=True)


# ----------------------------------------------------------------------
# Frank diagram


@dataclass
class FrankDiagram:
    angles: np.ndarray
    values: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([np.cos(self.angles), np.sin(self.angles)]) / self.values[:, None]

    def rows(self):
        pts = self.points
        for t, v, (x, y) in zip(self.angles, self.values, pts):
            yield float(t), float(v), float(x), float(y)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "phi", "x", "y"])
            for row in self.rows():
                w.writerow([repr(v) for v in row])


def _as_graph(source) -> PeriodicGraph:
    if isinstance(source, PeriodicGraph):
        return source
    if hasattr(source, "to_graph"):
        return source.to_graph()
    raise InputError("expected a PeriodicGraph or a WeightField2D")


def frank_diagram(source, k: int) -> FrankDiagram:
    """Exact values ``phi(cos 2 pi l/k, sin 2 pi l/k)`` for ``l = 0..k-1``."""
    if k < 8:
        raise InputError("at least 8 directions are needed")
    g = _as_graph(source)
    theta = 2 * np.pi * np.arange(k) / k
    vals = np.array([phi_lp(g, (math.cos(t), math.sin(t))).value for t in theta])
    return FrankDiagram(angles=theta, values=vals)


def anisotropy_error(fd) -> float:
    """``(max phi - min phi) / min phi`` over the sampled directions."""
    vals = np.asarray(fd.values if hasattr(fd, "values") else fd, dtype=float)
    if vals.size == 0:
        raise InputError("empty Frank diagram")
    lo = vals.min()
    if lo <= 0:
        raise InputError("anisotropy needs strictly positive values")
    return float((vals.max() - lo) / lo)


# ----------------------------------------------------------------------
# differentiability


def is_totally_irrational(nu, qmax=50, tol=1e-9) -> bool:
    """No nonzero integer vector with entries up to ``qmax`` is orthogonal to ``nu``."""
    nu = np.asarray(nu, dtype=float)
    nu = nu / np.linalg.norm(nu)
    grids = np.meshgrid(*[np.arange(-qmax, qmax + 1)] * len(nu), indexing="ij")
    Q = np.stack([x.reshape(-1) for x in grids], axis=1)
    Q = Q[np.any(Q != 0, axis=1)]
    return bool(np.all(np.abs(Q @ nu) > tol * np.linalg.norm(Q, axis=1)))


def optimal_moment_spread(g: PeriodicGraph, nu, slack=1e-10) -> float:
    """Diameter (max coordinate range) of the set of optimal dual moments."""
    nu = np.asarray(nu, dtype=float)
    vol = g.period ** g.dim
    gain = -(g.displacements @ nu)
    best = dual_max(g, nu).value * vol
    A_eq = _incidence(g)[1:]
    L = -g.displacements.T / vol
    bounds = np.column_stack([np.zeros(g.n_edges), g.weights])
    spread = 0.0
    for k in range(g.dim):
        ext = []
        for sign in (1.0, -1.0):
            r = linprog(sign * L[k], A_ub=-gain[None, :], b_ub=[-(best - slack * (1 + abs(best)))],
                        A_eq=A_eq, b_eq=np.zeros(A_eq.shape[0]), bounds=bounds,
                        method="highs-ds", options=_HIGHS_OPTIONS)
            ext.append(float(L[k] @ r.x))
        spread = max(spread, abs(ext[0] - ext[1]))
    return spread


def differentiability_probe(g: PeriodicGraph, nu, h=1e-3) -> dict:
    """One-sided directional derivatives of phi along the coordinate axes.

    ``nu`` is normalized first.  The report is diagnostic only.
    """
    nu = np.asarray(nu, dtype=float)
    nu = nu / np.linalg.norm(nu)
    f0 = phi_lp(g, nu).value
    steps = [h, h / 2, h / 4]
    axes = []
    for k in range(g.dim):
        e = np.zeros(g.dim)
        e[k] = 1.0
        right = [(phi_lp(g, nu + s * e).value - f0) / s for s in steps]
        left = [(f0 - phi_lp(g, nu - s * e).value) / s for s in steps]
        agree = all(abs(r - l) <= 10 * h for r, l in zip(right, left))
        axes.append({"axis": k, "right": right, "left": left, "agree": agree})
    spread = optimal_moment_spread(g, nu)
    return {
        "direction": nu.tolist(),
        "phi": f0,
        "totally_irrational": is_totally_irrational(nu),
        "axes": axes,
        "differentiable": all(a["agree"] for a in axes),
        "moment_spread": spread,
        "unique_moment": spread <= 1e-7,
    }


def support_roundtrip_error(poly: WulffPolytope, g: PeriodicGraph, k=360) -> float:
    """Max relative deviation between the polytope support function and phi."""
    worst = 0.0
    for t in 2 * np.pi * np.arange(k) / k:
        nu = np.array([math.cos(t), math.sin(t)])
        ref = phi_lp(g, nu).value
        worst = max(worst, abs(poly.support(nu) - ref) / max(1.0, abs(ref)))
    return worst


def zonotope_vertices(generators) -> np.ndarray:
    """Vertices of ``sum_k [-a_k, a_k]`` in counterclockwise order (2D)."""
    gens = np.asarray(generators, dtype=float)
    pts = np.array([np.sum(np.array(s)[:, None] * gens, axis=0)
                    for s in itertools.product((-1.0, 1.0), repeat=len(gens))])
    hull = ConvexHull(pts)
    return pts[hull.vertices]
