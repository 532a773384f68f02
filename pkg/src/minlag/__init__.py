"""Solver and certification harness for minimal Lagrangian graphs.

Finds a uniformly convex potential u on a convex planar domain whose gradient
maps the domain diffeomorphically onto a prescribed convex target while the
Lagrangian angle sum(arctan(lambda_k(D^2 u))) stays constant, and certifies
the solution against the full set of structural estimates the problem obeys.
"""

from .errors import (
    MinlagError,
    GeometryError,
    DomainExceededError,
    ConstructionError,
    SolverError,
    ObliquenessLostError,
    SafeguardError,
    NonConvergenceError,
    ContinuationStuckError,
    RayMissesTarget,
    ConfigError,
)
from .angle import (
    sym2,
    sym_eigvals,
    lagrangian_angle,
    angle_coefficients,
    angle_derivative,
    PsiProfile,
    build_psi_profile,
    psi_value,
    concavified_angle,
    uniqueness_matrix,
    legendre_transform,
)
from .domains import (
    DomainDescriptor,
    DefiningFunction,
    build_defining_function,
    build_appendix_h,
    blending_phi,
    sublevel_family,
    domain_metrics,
    distance_to_boundary,
    eval_defining,
    polygon_edge_distance,
)
from .grid import (
    RadialGrid,
    GridField,
    build_grid,
    gradient,
    hessian,
    integrate,
    pole_patch,
    ChartInterpolant,
    write_field_csv,
)

__version__ = "0.1.0"
