"""Critical site percolation on the hexagonal lattice: exact identities and Monte Carlo."""
from .cardy import Rectangle, Triangle, prediction, rectangle_prediction, triangle_prediction
from .eisenstein import Eisenstein
from .hexlattice import HexDomain, MarkedDomain, boundary_arc, build_domain, discretize
from .loops import (LinkPattern, LoopConfig, coloring_to_loops, crossing_equivalence_check,
                    enumerate_loop_configs, link_pattern, sample_loop_config)
from .observable import (ObservableField, boundary_values_check, discrete_contour_integral,
                         holomorphicity_residual, observable_exact, observable_mc)
from .percolation import (Coloring, CrossingEstimate, annulus_crossing_mc,
                          crossing_probability_mc, crosses, sample_coloring)
from .rng import RngState
from .spinor import SpinorColoring, build_cover, count_spinor_configs, spinor_to_loops

__all__ = [
    "Rectangle", "Triangle", "prediction", "rectangle_prediction", "triangle_prediction",
    "Eisenstein",
    "HexDomain", "MarkedDomain", "boundary_arc", "build_domain", "discretize",
    "LinkPattern", "LoopConfig", "coloring_to_loops", "crossing_equivalence_check",
    "enumerate_loop_configs", "link_pattern", "sample_loop_config",
    "ObservableField", "boundary_values_check", "discrete_contour_integral",
    "holomorphicity_residual", "observable_exact", "observable_mc",
    "Coloring", "CrossingEstimate", "annulus_crossing_mc", "crossing_probability_mc",
    "crosses", "sample_coloring",
    "RngState",
    "SpinorColoring", "build_cover", "count_spinor_configs", "spinor_to_loops",
]
__version__ = "0.1.0"
