"""Trajectory-descriptor toolkit for time-dependent vector fields.

Compute trajectory descriptors (component-power sums, arc length, vorticity
deviation) over grids of initial conditions, detect singular features that
trace stable and unstable manifolds, follow trajectory time averages to
convergence, extract invariant sets as level sets, and move planar systems
between rotating observer frames.
"""
from .analysis import (InvarianceReport, SingularFeatureReport,
                       TransectProfile, assess_convergence,
                       detect_singularities, invariance_check,
                       invariant_level_set, transect)
from .descriptor import (ConvergenceSeries, GridSpec, LDConfig, PSelection,
                         ScalarField, compute_field, descriptor_at,
                         descriptor_batch, partial_derivative_field, select_p,
                         time_average)
from .errors import (BlowUpError, FileFormatError, LdkitError,
                     NoExactSolutionError, OracleNotFoundError,
                     UnknownSystemError)
from .frames import RotatingFrame, transform_field, transform_point
from .integrator import (IntegratorConfig, Trajectory, integrate,
                         integrate_with_quadrature, quadrature_batch)
from .io import read_field, read_series, write_field, write_matrix, write_series
from .systems import (AnalyticOracle, VectorFieldSpec, evaluate_field,
                      exact_solution, has_exact_solution, list_systems,
                      make_spec, oracle_average_limit, oracle_descriptor)

__version__ = "0.1.0"
