"""Cayley-parametrized optimization on the Stiefel manifold.

The package turns orthonormality-constrained minimization into
unconstrained descent: a left-localized Cayley transform maps a dense
subset of the feasible set onto a vector space of structured
skew-symmetric parameters, where plain gradient methods apply and every
iterate maps back to a frame that is orthonormal to roundoff.
Retraction-based baselines (QR, polar, low-rank Cayley) and a benchmark
CLI round out the toolkit.

Layout
------
``linalg``       shared dense kernels and error types
``cayley``       the transform: forward, inverse, centers, mobility
``gradients``    pullback gradients, transport, sampled bound checks
``retractions``  tangent vectors, retractions, retraction pullback
``optimize``     Armijo backtracking and the descent drivers
``problems``     benchmark costs and random instances
``cli``          the ``stiefel-bench`` command
"""

from .cayley import (
    Center,
    SingularPointError,
    SkewParam,
    align_right_invariant,
    check_stiefel,
    construct_center,
    forward,
    inverse,
    mobility,
    singular_diagnostic,
)
from .gradients import (
    BasePointMismatchError,
    BoundReport,
    CostFunction,
    check_gradient_bounds,
    grad_at_zero,
    grad_pullback,
    stationarity_residual,
    transform_gradient,
)
from .linalg import (
    DimensionError,
    FactorizationError,
    RankError,
    SingularMatrixError,
    feasibility,
)
from .optimize import (
    BacktrackingConfig,
    LineSearchStallError,
    RunRecord,
    StoppingConfig,
    backtrack,
    run_gdm_cp,
    run_gdm_cp_retraction,
    run_gdm_retraction,
)
from .problems import (
    EigenInstance,
    StochasticEigenFamily,
    distance_cost,
    eigen_cost,
    load_instance,
    make_eigen_instance,
    rotation_center,
    save_instance,
    stochastic_eigen_family,
)
from .retractions import (
    StepTooLargeError,
    TangentVector,
    grad_retraction_pullback,
    inverse_retract_cayley,
    project_tangent,
    retract_cayley,
    retract_polar,
    retract_qr,
    riemannian_grad,
)

__version__ = "0.1.0"

__all__ = [
    "BacktrackingConfig",
    "BasePointMismatchError",
    "BoundReport",
    "Center",
    "CostFunction",
    "DimensionError",
    "EigenInstance",
    "FactorizationError",
    "LineSearchStallError",
    "RankError",
    "RunRecord",
    "SingularMatrixError",
    "SingularPointError",
    "SkewParam",
    "StepTooLargeError",
    "StochasticEigenFamily",
    "StoppingConfig",
    "TangentVector",
    "align_right_invariant",
    "backtrack",
    "check_gradient_bounds",
    "check_stiefel",
    "construct_center",
    "distance_cost",
    "eigen_cost",
    "feasibility",
    "forward",
    "grad_at_zero",
    "grad_pullback",
    "grad_retraction_pullback",
    "inverse",
    "inverse_retract_cayley",
    "load_instance",
    "make_eigen_instance",
    "mobility",
    "project_tangent",
    "retract_cayley",
    "retract_polar",
    "retract_qr",
    "riemannian_grad",
    "rotation_center",
    "run_gdm_cp",
    "run_gdm_cp_retraction",
    "run_gdm_retraction",
    "save_instance",
    "singular_diagnostic",
    "stationarity_residual",
    "stochastic_eigen_family",
    "transform_gradient",
    "__version__",
]
