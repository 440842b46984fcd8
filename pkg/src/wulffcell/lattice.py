"""Periodic interaction graphs and the localized energy E(u, A).

A :class:`PeriodicGraph` stores one periodicity cell ``[0, T)^d`` of a
discrete set together with the directed interactions leaving each cell
site.  An edge ``(src, dst, z, c)`` couples the point ``x_src`` with the
point ``x_dst + T z``; all other interactions follow by translating by
multiples of ``T``.

Lattice points are addressed as pairs ``(site, z)`` standing for the
position ``x_site + T z``.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import InputError, ModelInvariantError


class Edge(NamedTuple):
    src: int
    dst: int
    z: tuple
    c: float


def _readonly(a):
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PeriodicGraph:
    """T-periodic weighted directed graph.

    Edges with zero weight are discarded on construction.  Construction
    validates discreteness, finite range and connectivity of the infinite
    periodic graph and raises :class:`InputError` otherwise.
    """

    dim: int
    period: int
    sites: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    offsets: np.ndarray
    weights: np.ndarray
    range: float | None = None
    min_distance: float = field(init=False)

    def __post_init__(self):
        d = int(self.dim)
        T = int(self.period)
        if d < 1:
            raise InputError(f"dimension must be >= 1, got {self.dim}", "schema")
        if T < 1:
            raise InputError(f"period must be >= 1, got {self.period}", "schema")
        sites = np.asarray(self.sites, dtype=float).reshape(-1, d)
        src = np.asarray(self.src, dtype=np.int64).reshape(-1)
        dst = np.asarray(self.dst, dtype=np.int64).reshape(-1)
        offsets = np.asarray(self.offsets, dtype=np.int64).reshape(-1, d)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        n = len(sites)
        if n == 0:
            raise InputError("graph has no sites", "schema")
        if not (len(src) == len(dst) == len(offsets) == len(weights)):
            raise InputError("edge arrays have inconsistent lengths", "schema")
        if not np.all(np.isfinite(sites)):
            raise InputError("site coordinates must be finite", "schema")
        if np.any(sites < 0) or np.any(sites >= T):
            raise InputError("site coordinates must lie in [0, T)^d", "site-outside-cell")
        if np.any(np.isnan(weights)) or not np.all(np.isfinite(weights)):
            raise InputError("edge weights must be finite numbers", "nan-weight")
        if np.any(weights < 0):
            raise InputError("edge weights must be nonnegative", "negative-weight")
        if len(src) and (src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n):
            raise InputError("edge refers to an unknown site index", "unknown-site")

        keep = weights > 0
        src, dst, offsets, weights = src[keep], dst[keep], offsets[keep], weights[keep]

        disp = sites[dst] + T * offsets - sites[src]
        lengths = np.linalg.norm(disp, axis=1)
        if np.any(lengths == 0):
            raise InputError("edge couples a site with itself", "zero-length-edge")
        max_len = float(lengths.max()) if len(lengths) else 0.0
        R = self.range
        if R is None:
            R = max(1.0, max_len) + 1e-9
        elif not max_len < R:
            raise InputError(
                f"edge of length {max_len:g} exceeds interaction range {R:g}", "range"
            )

        for name, val in [
            ("dim", d), ("period", T), ("sites", sites), ("src", src), ("dst", dst),
            ("offsets", offsets), ("weights", weights), ("range", float(R)),
        ]:
            object.__setattr__(self, name, _readonly(val) if isinstance(val, np.ndarray) else val)

        cmin = _min_site_distance(sites, T)
        if cmin <= 1e-9:
            raise InputError("two sites coincide modulo the period", "not-discrete")
        object.__setattr__(self, "min_distance", cmin)
        _check_connected(n, d, src, dst, offsets)

    # ------------------------------------------------------------------
    @classmethod
    def from_edges(cls, dim, period, sites, edges: Sequence, range=None):
        """Build from an iterable of ``(src, dst, z, c)`` tuples."""
        edges = list(edges)
        if edges:
            src, dst, z, c = zip(*edges)
        else:
            src, dst, z, c = (), (), np.zeros((0, dim)), ()
        return cls(dim, period, np.asarray(sites, float), src, dst, np.asarray(z).reshape(-1, dim), c,
                   range=range)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_edges(self) -> int:
        return len(self.weights)

    @property
    def edges(self) -> list[Edge]:
        return [
            Edge(int(s), int(t), tuple(int(v) for v in z), float(c))
            for s, t, z, c in zip(self.src, self.dst, self.offsets, self.weights)
        ]

    @property
    def displacements(self) -> np.ndarray:
        """Vector ``j - i`` from source point to target point, one row per edge."""
        return self.sites[self.dst] + self.period * self.offsets - self.sites[self.src]

    def position(self, site, z) -> np.ndarray:
        return self.sites[np.asarray(site)] + self.period * np.asarray(z)

    def with_weights(self, weights) -> "PeriodicGraph":
        return PeriodicGraph(self.dim, self.period, self.sites, self.src, self.dst, self.offsets,
                             weights, range=self.range)

    def reversed(self) -> "PeriodicGraph":
        """Same interactions with every edge orientation flipped."""
        # edge (s -> t + Tz) becomes (t -> s - Tz)
        return PeriodicGraph(self.dim, self.period, self.sites, self.dst, self.src, -self.offsets,
                             self.weights, range=self.range)

    def tile(self, k: int) -> "PeriodicGraph":
        """The same system viewed with period ``k*T`` (``k**d`` copies of the cell)."""
        if k < 1:
            raise InputError("tiling factor must be >= 1")
        d, T, n = self.dim, self.period, self.n_sites
        blocks = np.array(list(itertools.product(range(k), repeat=d)), dtype=np.int64)
        index = {tuple(b): bi for bi, b in enumerate(blocks)}
        sites = np.concatenate([self.sites + T * b for b in blocks])
        src, dst, off, w = [], [], [], []
        for bi, b in enumerate(blocks):
            tgt = b + self.offsets
            tb, tz = np.mod(tgt, k), np.floor_divide(tgt, k)
            for e in range(self.n_edges):
                src.append(bi * n + self.src[e])
                dst.append(index[tuple(tb[e])] * n + self.dst[e])
                off.append(tz[e])
                w.append(self.weights[e])
        return PeriodicGraph(d, k * T, sites, src, dst, np.array(off).reshape(-1, d), w,
                             range=self.range)

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "period": self.period,
            "sites": self.sites.tolist(),
            "edges": [{"src": e.src, "dst": e.dst, "z": list(e.z), "c": e.c} for e in self.edges],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PeriodicGraph":
        try:
            dim = int(data["dim"])
            period = data["period"]
            if int(period) != period:
                raise InputError("period must be an integer", "schema")
            sites = np.asarray(data["sites"], dtype=float).reshape(-1, dim)
            edges = [(int(e["src"]), int(e["dst"]), [int(v) for v in e["z"]], float(e["c"]))
                     for e in data["edges"]]
        except InputError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed graph description: {exc}", "schema") from exc
        for e in edges:
            if len(e[2]) != dim:
                raise InputError("edge offset has wrong dimension", "schema")
        return cls.from_edges(dim, int(period), sites, edges, range=data.get("range"))


def load_graph(path) -> PeriodicGraph:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: not valid JSON ({exc})", "schema") from exc
    return PeriodicGraph.from_dict(data)


def save_graph(g: PeriodicGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(g.to_dict(), fh, indent=1)


def _min_site_distance(sites, T):
    n, d = sites.shape
    best = np.inf
    for z in itertools.product((-1, 0, 1), repeat=d):
        shifted = sites + T * np.asarray(z)
        diff = sites[:, None, :] - shifted[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        if not any(z):
            np.fill_diagonal(dist, np.inf)
        best = min(best, float(dist.min()))
    return best


def _integer_lattice_index(vectors, d):
    """Index of the sublattice of Z^d spanned by ``vectors`` (0 if not full rank)."""
    rows = [list(map(int, v)) for v in vectors if any(v)]
    r = 0
    index = 1
    for col in range(d):
        while True:
            live = [i for i in range(r, len(rows)) if rows[i][col] != 0]
            if len(live) <= 1:
                break
            piv = min(live, key=lambda i: abs(rows[i][col]))
            for i in live:
                if i != piv:
                    q = rows[i][col] // rows[piv][col]
                    rows[i] = [a - q * b for a, b in zip(rows[i], rows[piv])]
        live = [i for i in range(r, len(rows)) if rows[i][col] != 0]
        if not live:
            return 0
        i = live[0]
        rows[r], rows[i] = rows[i], rows[r]
        index *= abs(rows[r][col])
        r += 1
    return index


def _check_connected(n, d, src, dst, offsets):
    adj = [[] for _ in range(n)]
    for e, (s, t) in enumerate(zip(src, dst)):
        adj[s].append((t, e, 1))
        adj[t].append((s, e, -1))
    zpos = np.zeros((n, d), dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        a = queue.popleft()
        for b, e, sign in adj[a]:
            if not seen[b]:
                seen[b] = True
                zpos[b] = zpos[a] + sign * offsets[e]
                queue.append(b)
    if not seen.all():
        raise InputError(
            f"sites {np.flatnonzero(~seen).tolist()} are not connected to site 0", "disconnected"
        )
    cycles = zpos[src] + offsets - zpos[dst]
    if _integer_lattice_index(cycles.tolist(), d) != 1:
        raise InputError(
            "periodic copies of the cell are not all connected to each other", "disconnected"
        )


# ----------------------------------------------------------------------
# fields and regions


class SpinField:
    """Cell-periodic values plus an optional affine part.

    ``u(x_s + T z) = values[s] + <slope, x_s + T z>``.
    """

    def __init__(self, values, slope=None):
        self.values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise InputError("spin values must be finite")
        self.slope = None if slope is None else np.asarray(slope, dtype=float)

    def evaluate(self, g: PeriodicGraph, site, z):
        site = np.asarray(site)
        if len(self.values) != g.n_sites:
            raise InputError("spin field size does not match the number of sites", "unknown-site")
        out = self.values[site]
        if self.slope is not None:
            out = out + g.position(site, z) @ self.slope
        return out


class FunctionField:
    """Field given by a function of positions, ``func(points) -> values``."""

    def __init__(self, func: Callable[[np.ndarray], np.ndarray]):
        self.func = func

    def evaluate(self, g, site, z):
        return np.asarray(self.func(g.position(site, z)), dtype=float)


class LatticeField:
    """Field given by a function of ``(site, z)`` arrays."""

    def __init__(self, func):
        self.func = func

    def evaluate(self, g, site, z):
        return np.asarray(self.func(np.asarray(site), np.asarray(z)), dtype=float)


class ShiftedField:
    """``u(. - T*shift)`` for an integer vector ``shift``."""

    def __init__(self, base, shift):
        self.base = base
        self.shift = np.asarray(shift, dtype=np.int64)

    def evaluate(self, g, site, z):
        return self.base.evaluate(g, site, np.asarray(z) - self.shift)


class TransformedField:
    """``scale * u + offset`` (or a sum of fields when ``other`` is given)."""

    def __init__(self, base, scale=1.0, offset=0.0, other=None):
        self.base, self.scale, self.offset, self.other = base, scale, offset, other

    def evaluate(self, g, site, z):
        out = self.scale * self.base.evaluate(g, site, z) + self.offset
        if self.other is not None:
            out = out + self.other.evaluate(g, site, z)
        return out


def half_space_indicator(nu) -> FunctionField:
    """The field equal to 1 where ``<nu, x> >= 0`` and 0 elsewhere."""
    nu = np.asarray(nu, dtype=float)
    return FunctionField(lambda x: (x @ nu >= 0).astype(float))


def _as_field(u):
    if hasattr(u, "evaluate"):
        return u
    if callable(u):
        return FunctionField(u)
    return SpinField(u)


class Box:
    """Half-open axis-aligned box ``[lo, hi)``."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)

    def lattice_points(self, g: PeriodicGraph):
        T = g.period
        sites, zs = [], []
        for s, x in enumerate(g.sites):
            zlo = np.floor((self.lo - x) / T).astype(int)
            zhi = np.ceil((self.hi - x) / T).astype(int)
            ranges = [range(a, b + 1) for a, b in zip(zlo, zhi)]
            for z in itertools.product(*ranges):
                p = x + T * np.asarray(z)
                if np.all(p >= self.lo) and np.all(p < self.hi):
                    sites.append(s)
                    zs.append(z)
        return np.asarray(sites, dtype=np.int64), np.asarray(zs, dtype=np.int64).reshape(-1, g.dim)

    def shifted(self, g, shift):
        t = g.period * np.asarray(shift, dtype=float)
        return Box(self.lo + t, self.hi + t)


class PointSet:
    """Explicit list of lattice points ``(site, z)``."""

    def __init__(self, sites, zs):
        self.sites = np.asarray(sites, dtype=np.int64).reshape(-1)
        self.zs = np.asarray(zs, dtype=np.int64).reshape(len(self.sites), -1)

    def lattice_points(self, g):
        if len(self.sites) and (self.sites.min() < 0 or self.sites.max() >= g.n_sites):
            raise InputError("region refers to an unknown site index", "unknown-site")
        pts = sorted(set(zip(self.sites.tolist(), map(tuple, self.zs.tolist()))))
        if not pts:
            return np.zeros(0, dtype=np.int64), np.zeros((0, g.dim), dtype=np.int64)
        s, z = zip(*pts)
        return np.asarray(s, dtype=np.int64), np.asarray(z, dtype=np.int64)

    def shifted(self, g, shift):
        return PointSet(self.sites, self.zs + np.asarray(shift, dtype=np.int64))


def cell_region(g: PeriodicGraph) -> PointSet:
    """The sites of the periodicity cell itself (all with ``z = 0``)."""
    return PointSet(np.arange(g.n_sites), np.zeros((g.n_sites, g.dim), dtype=np.int64))


# ----------------------------------------------------------------------
# energy


def _bond_terms(g, u, region):
    """Arrays (c, u_i, u_j) over all pairs (i in region, edge leaving i)."""
    if np.any(g.weights < 0):
        raise ModelInvariantError("negative interaction weight")
    u = _as_field(u)
    sites, zs = region.lattice_points(g)
    cs, ui_all, uj_all = [], [], []
    if len(sites) == 0:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    ui = u.evaluate(g, sites, zs)
    for e in range(g.n_edges):
        sel = np.flatnonzero(sites == g.src[e])
        if len(sel) == 0:
            continue
        uj = u.evaluate(g, np.full(len(sel), g.dst[e]), zs[sel] + g.offsets[e])
        cs.append(np.full(len(sel), g.weights[e]))
        ui_all.append(ui[sel])
        uj_all.append(uj)
    if not cs:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    c, a, b = np.concatenate(cs), np.concatenate(ui_all), np.concatenate(uj_all)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InputError("field takes non-finite values")
    return c, a, b


def energy(g: PeriodicGraph, u, region) -> float:
    """Sum over i in the region and all j of ``c_ij (u(i) - u(j))^+``."""
    c, a, b = _bond_terms(g, u, region)
    return float(np.sum(c * np.maximum(a - b, 0.0)))


def coarea_decompose(g: PeriodicGraph, u, region):
    """Split ``energy(g, u, region)`` into energies of superlevel sets.

    Returns a list of ``(t, width, E_t)`` where ``t`` runs over the sorted
    distinct values of ``u`` touching the region (except the largest),
    ``width`` is the gap to the next value and ``E_t`` is the energy of
    the indicator of ``{u > t}``.  ``sum(width * E_t)`` equals the energy.
    """
    c, a, b = _bond_terms(g, u, region)
    levels = np.unique(np.concatenate([a, b]))
    out = []
    for lo, hi in zip(levels[:-1], levels[1:]):
        e_t = float(np.sum(c * ((a > lo) & ~(b > lo))))
        out.append((float(lo), float(hi - lo), e_t))
    return out


def translate_energy_check(g: PeriodicGraph, u, region, shift):
    """Return ``(E(u, A), E(u(. - T z), A + T z))``; periodicity makes them equal."""
    u = _as_field(u)
    return energy(g, u, region), energy(g, ShiftedField(u, shift), region.shifted(g, shift))
