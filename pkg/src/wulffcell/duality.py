"""Dual flow representation of the surface energy density.

``phi(nu) = T^-d max { <nu, p(alpha)> : alpha in C }`` where ``C`` is the
set of cell-periodic edge flows with ``0 <= alpha_e <= c_e`` and zero net
divergence at every site, and ``p(alpha) = sum_e alpha_e (i - j)``.

Edges store the displacement ``j - i`` (source to target); the moment
uses ``i - j``, so it is assembled with a minus sign.

The maximization is solved with the HiGHS dual simplex through scipy,
independently of the network simplex behind :func:`wulffcell.cell.phi_lp`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from .errors import InputError, ModelInvariantError
from .lattice import PeriodicGraph

DIVERGENCE_TOL = 1e-9

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


def flow_moment(g: PeriodicGraph, alpha) -> np.ndarray:
    """``T^-d sum_e alpha_e (i - j)``."""
    alpha = np.asarray(alpha, dtype=float)
    return -(alpha @ g.displacements) / g.period ** g.dim


def divergence(g: PeriodicGraph, alpha) -> np.ndarray:
    """Net inflow minus outflow at each cell site (periodic copies identified)."""
    alpha = np.asarray(alpha, dtype=float)
    div = np.zeros(g.n_sites)
    np.add.at(div, g.dst, alpha)
    np.subtract.at(div, g.src, alpha)
    return div


def _incidence(g):
    m, n = g.n_edges, g.n_sites
    rows = np.concatenate([g.src, g.dst])
    cols = np.concatenate([np.arange(m), np.arange(m)])
    vals = np.concatenate([np.ones(m), -np.ones(m)])
    return coo_matrix((vals, (rows, cols)), shape=(n, m)).tocsr()


@dataclass
class DualResult:
    value: float
    flow: np.ndarray
    moment: np.ndarray


def dual_max(g: PeriodicGraph, nu) -> DualResult:
    """Maximize ``<nu, p(alpha)>`` over admissible flows."""
    nu = np.asarray(nu, dtype=float).reshape(-1)
    if nu.shape != (g.dim,):
        raise InputError(f"direction must have {g.dim} components")
    vol = g.period ** g.dim
    gain = -(g.displacements @ nu)
    A = _incidence(g)[1:]  # one divergence row is redundant
    res = linprog(-gain, A_eq=A, b_eq=np.zeros(A.shape[0]),
                  bounds=np.column_stack([np.zeros(g.n_edges), g.weights]),
                  method="highs-ds", options=_HIGHS_OPTIONS)
    if res.status != 0:
        raise ModelInvariantError(f"flow LP failed: {res.message}")
    alpha = np.clip(res.x, 0.0, g.weights)
    return DualResult(value=float(alpha @ gain) / vol, flow=alpha, moment=flow_moment(g, alpha))


@dataclass
class FlowReport:
    divergence: dict = field(default_factory=dict)   # site -> residual
    capacity: dict = field(default_factory=dict)     # edge -> violation (signed)

    @property
    def ok(self) -> bool:
        return not self.divergence and not self.capacity

    def to_dict(self):
        return {"ok": self.ok,
                "divergence": {str(k): v for k, v in self.divergence.items()},
                "capacity": {str(k): v for k, v in self.capacity.items()}}


def verify_flow(g: PeriodicGraph, alpha, tol=DIVERGENCE_TOL) -> FlowReport:
    """List every site with nonzero divergence and every edge outside ``[0, c_e]``."""
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha.shape != (g.n_edges,):
        raise InputError(f"flow has {alpha.size} entries, graph has {g.n_edges} edges", "size")
    rep = FlowReport()
    div = divergence(g, alpha)
    for k in np.flatnonzero(np.abs(div) > tol):
        rep.divergence[int(k)] = float(div[k])
    over = alpha - g.weights
    for e in range(g.n_edges):
        if alpha[e] < -tol:
            rep.capacity[e] = float(alpha[e])
        elif over[e] > tol:
            rep.capacity[e] = float(over[e])
    return rep


def check_duality(g: PeriodicGraph, samples=50, seed=7):
    """Largest primal/dual discrepancy over random directions."""
    from .cell import phi_lp

    rng = np.random.default_rng(seed)
    worst_gap, worst_rel, worst_nu = 0.0, 0.0, None
    flows_ok = True
    for _ in range(samples):
        nu = rng.standard_normal(g.dim)
        p = phi_lp(g, nu).value
        d = dual_max(g, nu)
        flows_ok &= verify_flow(g, d.flow).ok
        gap = abs(p - d.value)
        worst_rel = max(worst_rel, gap / (1.0 + abs(p)))
        if worst_nu is None or gap > worst_gap:
            worst_gap, worst_nu = gap, nu
    return {"max_gap": float(worst_gap), "max_relative_gap": float(worst_rel),
            "worst_nu": worst_nu.tolist(), "samples": samples,
            "flows_admissible": bool(flows_ok)}
