"""Ready-made graphs: the nearest-neighbour lattice and random test graphs."""

from __future__ import annotations

import itertools
import json
from importlib import resources

import numpy as np

from .errors import InputError
from .lattice import PeriodicGraph
from .saddle import WeightField2D, optimal_t2_weights


def nearest_neighbour(dim=2, weight=1.0) -> PeriodicGraph:
    """``Z^d`` with period 1 and both orientations of every unit bond."""
    edges = []
    for k in range(dim):
        for s in (1, -1):
            z = [0] * dim
            z[k] = s
            edges.append((0, 0, tuple(z), weight))
    return PeriodicGraph.from_edges(dim, 1, [[0.0] * dim], edges)


def optab2_graph() -> PeriodicGraph:
    return optimal_t2_weights().to_graph()


def learned_t4_weights() -> WeightField2D:
    """T=4 field from ``optimize(OptimizeConfig(period=4, k=16, restarts=10, seed=7))``."""
    text = resources.files("wulffcell").joinpath("data/learned_T4.json").read_text()
    return WeightField2D.from_dict(json.loads(text))


def random_weight_field(T, rng, lo=0.1, hi=0.4) -> WeightField2D:
    return WeightField2D.from_array(rng.uniform(lo, hi, size=(4, T, T)))


def random_graph(rng, T=None, max_edges=40, dim=2, max_tries=200) -> PeriodicGraph:
    """Random connected periodic graph with integer sites and bonds of length <= 2.

    A spanning set (every site linked to its right and upper neighbour) is
    always included so the graph is connected; remaining edges are random.
    """
    for _ in range(max_tries):
        T_ = int(T if T is not None else rng.integers(1, 5))
        cells = list(itertools.product(range(T_), repeat=dim))
        # keep the graph small enough for the edge budget
        rng.shuffle(cells)
        n = int(rng.integers(1, min(len(cells), max(1, max_edges // (dim + 1))) + 1))
        sites = np.array(sorted(cells[:n]), dtype=float)
        edges = []
        for i in range(n):
            for k in range(dim):
                step = np.zeros(dim)
                step[k] = 1.0
                edges.append(_edge_to(sites, i, sites[i] + step, T_, rng))
        extra = max_edges - len(edges)
        for _ in range(int(rng.integers(0, max(0, extra) + 1))):
            i = int(rng.integers(n))
            delta = rng.integers(-2, 3, size=dim).astype(float)
            if not delta.any():
                continue
            edges.append(_edge_to(sites, i, sites[i] + delta, T_, rng))
        edges = [e for e in edges if e is not None]
        try:
            return PeriodicGraph.from_edges(dim, T_, sites.tolist(), edges[:max_edges])
        except InputError:
            continue
    raise InputError("could not generate a connected random graph")


def _edge_to(sites, i, target, T, rng):
    # link site i to the nearest site translate of any site to ``target``
    best = None
    for j, s in enumerate(sites):
        z = np.round((target - s) / T)
        pos = s + T * z
        d = np.abs(pos - target).sum()
        if best is None or d < best[0]:
            best = (d, j, tuple(int(x) for x in z))
    _, j, z = best
    if j == i and not any(z):
        return None
    return (i, j, z, float(rng.uniform(0.2, 2.0)))
