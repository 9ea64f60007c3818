"""Simulation and numerical checks for spread-out percolation in R^d."""

__version__ = "0.1.0"

from .branching import expected_paths, gw_simulate, survival_probability
from .errors import (BracketError, ConvergenceError, InvalidArgumentError, InvalidConfigError,
                     NotNormalizedError, SpreadPercError, UndefinedStatisticError)
from .geometry import (PointCloud, Window, displacement, empirical_density, jittered_lattice,
                       lattice_points, sample_poisson)
from .graph import ComponentStats, box_stats, build_cell_index, mean_degree, sample_graph
from .kernel import KernelSpec, annulus, ball, edge_probability, phi, radial_table
from .rng import Stream

__all__ = [
    "BracketError", "ComponentStats", "ConvergenceError", "InvalidArgumentError", "InvalidConfigError",
    "KernelSpec", "NotNormalizedError", "PointCloud", "SpreadPercError", "Stream",
    "UndefinedStatisticError", "Window", "annulus", "ball", "box_stats", "build_cell_index",
    "displacement", "edge_probability", "empirical_density", "expected_paths", "gw_simulate",
    "jittered_lattice", "lattice_points", "mean_degree", "phi", "radial_table", "sample_graph",
    "sample_poisson", "survival_probability",
]
