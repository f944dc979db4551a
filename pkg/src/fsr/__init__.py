"""High-order flux reconstruction schemes on node-centered edge-based grids."""

from .discretization import Discretization, assemble_residual, forcing_field, numerical_flux
from .errors import (ConfigError, DegenerateStencilError, FSRError, InadmissibleStateError,
                     InvalidParameterError, InvalidSeriesError, IterationFailureError,
                     RoeFailureError, SolverDivergenceError, StencilTooSmallError)
from .lsq import LSQOperator, lsq_gradient, lsq_hessian, lsq_operator
from .mesh import Mesh, build_mesh, build_quad_grid, build_tri_grid, build_uniform_1d, disjoint_union
from .physics import EulerModel, ScalarModel, State, convert, make_model
from .reconstruction import PRESETS, SCHEME_NAMES, SchemeConfig, get_scheme
from .solver import SolveReport, advance_unsteady, solve_newton, solve_steady
from .verification import (CASES, ConvergenceReport, ExactSolution, convergence_order, error_norm,
                           get_case, truncation_error_probe)

__version__ = "0.1.0"
