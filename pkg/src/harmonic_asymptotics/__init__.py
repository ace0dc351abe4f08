"""Numerical asymptotics of harmonic and elliptic solutions near points and cones.

Frequency and doubling profiles, blowup traces, cone spectra, a finite
difference elliptic solver and critical-set box counting.
"""

__version__ = "0.1.0"

from .errors import (AnalysisError, ConfigError, DataError, DegenerateFieldError, DomainError, EmptySetError,
                     EvaluationError, NumericError, PreconditionError, RangeError, SpecificationError)
from .fields import (PolynomialSpec, ScalarField, combine, dilate, fourier_mode, harmonic_mode_field,
                     make_cone_solution, make_harmonic_polynomial, make_log_drift, perturb_power, rotating_field,
                     spherical_mode)
from .quadrature import (DEFAULT_OPTIONS, QuadratureOptions, RadialGrid, RadialProfile, dirichlet_energy, profile,
                         solid_mean_square, sphere_mean_square)
from .frequency import (AdmissibleSet, check_relation, doubling_profile, frequency_profile, limit_homogeneity,
                        rigidity_classify)
from .cones import ConeSpec, admissible_from_cone, cap_spectrum, sector_spectrum, shooting_mu
from .blowup import SphericalModeBasis, blowup_trace, blowup_traces, classify_limit, extract_leading_term
from .solver import (CoefficientSet, DomainMask, GridSolution, RobinData, solve_dirichlet_domain, solve_interior,
                     solve_robin, to_field)
from .singular import box_dimension, critical_cloud
