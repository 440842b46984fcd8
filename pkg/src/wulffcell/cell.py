"""Exact evaluation of the finite cell formula by linear programming.

For a direction ``nu`` the surface energy density is

    phi(nu) = T^-d * min_v  sum_e c_e (v(src) - v(dst) + <nu, x_src - x_dst>)^+

over cell-periodic correctors ``v``, where ``x_dst`` is the target point of
edge ``e`` (including its offset).  The LP is solved as a maximum-gain
circulation (its dual); the tree potentials are the optimal corrector and
the arc flows the optimal dual multipliers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ModelInvariantError
from .lattice import PeriodicGraph, SpinField
from .netflow import max_gain_circulation


@dataclass
class CellSolution:
    direction: np.ndarray
    value: float
    corrector: SpinField
    dual_flow: np.ndarray | None = None
    gauge: int = 0
    state: object = None  # SaddleState for the grid solver

    @property
    def slacks(self) -> np.ndarray | None:
        return getattr(self, "_slacks", None)


def edge_gains(g: PeriodicGraph, nu) -> np.ndarray:
    """``<nu, i - j>`` per edge (``i`` the source point, ``j`` the target)."""
    return -(g.displacements @ np.asarray(nu, dtype=float))


def cell_objective(g: PeriodicGraph, nu, v) -> float:
    """Normalized cell energy of the competitor ``<nu, x> + v``."""
    r = edge_gains(g, nu) + v[g.src] - v[g.dst]
    return float(np.sum(g.weights * np.maximum(r, 0.0)) / g.period ** g.dim)


def _check_nu(g, nu):
    nu = np.asarray(nu, dtype=float).reshape(-1)
    if nu.shape != (g.dim,):
        raise InputError(f"direction must have {g.dim} components")
    if not np.all(np.isfinite(nu)):
        raise InputError("direction must be finite")
    return nu


def phi_lp(g: PeriodicGraph, nu) -> CellSolution:
    """Solve the cell problem exactly; returns value, corrector and dual flow."""
    nu = _check_nu(g, nu)
    gain = edge_gains(g, nu)
    res = max_gain_circulation(g.n_sites, g.src, g.dst, g.weights, gain)
    v = res.potential - res.potential[0]
    vol = g.period ** g.dim
    primal = float(np.sum(g.weights * np.maximum(res.reduced, 0.0)) / vol)
    dual = float(np.dot(res.flow, gain) / vol)
    if abs(primal - dual) > 1e-9 * (1.0 + abs(primal)):
        raise ModelInvariantError(f"LP optimality check failed: primal {primal} vs dual {dual}")
    sol = CellSolution(direction=nu, value=max(primal, 0.0), corrector=SpinField(v, slope=nu),
                       dual_flow=res.flow, gauge=0)
    sol._slacks = res.reduced
    return sol


def phi_value(g: PeriodicGraph, nu) -> float:
    return phi_lp(g, nu).value


def affine_upper_bound(g: PeriodicGraph) -> float:
    """Constant C with ``phi(nu) <= C |nu|``: the cell energy of ``v = 0``
    bounded edge by edge via Cauchy-Schwarz."""
    return float(np.sum(g.weights * np.linalg.norm(g.displacements, axis=1)) / g.period ** g.dim)


def k_cell_invariance_check(g: PeriodicGraph, nu, k: int):
    """``(phi from the T-cell, phi from the kT-cell)``; the two agree."""
    if k < 2:
        raise InputError("k must be at least 2")
    return phi_lp(g, nu).value, phi_lp(g.tile(k), nu).value
