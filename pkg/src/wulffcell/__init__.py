"""Surface energy densities of periodic lattice energies and their Wulff shapes."""

from .cell import CellSolution, phi_lp, phi_value
from .duality import check_duality, dual_max, verify_flow
from .errors import (InputError, IterativeFailure, ModelInvariantError, NumericalDegeneracy,
                     WulffcellError)
from .lattice import PeriodicGraph, load_graph, save_graph
from .saddle import WeightField2D, load_weights, optimal_t2_weights, phi_grid, save_weights
from .wulff import anisotropy_error, frank_diagram, wulff_polytope_2d

__version__ = "0.1.0"

__all__ = [
    "CellSolution", "InputError", "IterativeFailure", "ModelInvariantError",
    "NumericalDegeneracy", "PeriodicGraph", "WeightField2D", "WulffcellError",
    "anisotropy_error", "check_duality", "dual_max", "frank_diagram", "load_graph",
    "load_weights", "optimal_t2_weights", "phi_grid", "phi_lp", "phi_value", "save_graph",
    "save_weights", "verify_flow", "wulff_polytope_2d",
]
