"""Numerical certificates for candidate solutions of infinite-horizon
optimal control problems.

The package checks, rather than solves: given a problem description and a
candidate trajectory/control pair, it audits the standing assumptions,
reconstructs the adjoint along two independent routes, and evaluates the
first-order conditions (maximum condition, transversality, normality) plus
an Arrow-type sufficiency test.  Everything reports concrete residuals and
witnesses instead of a bare boolean.
"""

from .expressions import DomainError, Expression, ExpressionSyntaxError, parse_expression
from .integrate import (
    BlowUp,
    InvalidGrid,
    MissingTailBound,
    holder_pairing_check,
    improper_integral,
    improper_verdict,
    solve_ode,
    solve_state,
    weighted_norm,
)
from .pmp import (
    AdjointSolution,
    AtomOffActiveSet,
    CertificateReport,
    ConditionRecord,
    DivergentTail,
    IllConditioned,
    UnboundedAbove,
    adjoint_backward,
    adjoint_from_function,
    adjoint_representation,
    check_adjoint_residual,
    check_integral_adjoint,
    check_maximum_condition,
    check_michel,
    check_normality,
    check_transversality,
    check_weak_inequality,
    pontryagin_H,
    pontryagin_H_u,
    pontryagin_H_x,
    verify_certificate,
)
from .problem import (
    ActiveSet,
    AssumptionReport,
    CandidateProcess,
    ControlBox,
    ControlProblem,
    DimensionMismatch,
    EmptyTube,
    GradientDiagnostic,
    InfeasibleState,
    ProblemSyntaxError,
    SlaterReport,
    UnknownIdentifier,
    active_indices,
    audit_assumptions,
    candidate_from_functions,
    check_objective_gradient,
    dynamics_residual,
    parse_problem,
    slater_check,
)
from .sufficiency import ConcavityReport, check_arrow, hamiltonian_sup
from .weights import (
    InvalidExponent,
    NonPositiveWeight,
    WeightSpec,
    check_distribution,
    check_dominance,
    check_tube_scale,
    check_weight_properties,
    exp_decay,
    power,
    weibull,
)

__version__ = "0.1.0"

__all__ = [
    "ActiveSet",
    "AdjointSolution",
    "AssumptionReport",
    "AtomOffActiveSet",
    "BlowUp",
    "CandidateProcess",
    "CertificateReport",
    "ConcavityReport",
    "ConditionRecord",
    "ControlBox",
    "ControlProblem",
    "DimensionMismatch",
    "DivergentTail",
    "DomainError",
    "EmptyTube",
    "Expression",
    "ExpressionSyntaxError",
    "GradientDiagnostic",
    "IllConditioned",
    "InfeasibleState",
    "InvalidExponent",
    "InvalidGrid",
    "MissingTailBound",
    "NonPositiveWeight",
    "ProblemSyntaxError",
    "SlaterReport",
    "UnboundedAbove",
    "UnknownIdentifier",
    "WeightSpec",
    "active_indices",
    "adjoint_backward",
    "adjoint_from_function",
    "adjoint_representation",
    "audit_assumptions",
    "candidate_from_functions",
    "check_arrow",
    "check_adjoint_residual",
    "check_distribution",
    "check_dominance",
    "check_integral_adjoint",
    "check_maximum_condition",
    "check_michel",
    "check_normality",
    "check_objective_gradient",
    "check_transversality",
    "check_tube_scale",
    "check_weak_inequality",
    "check_weight_properties",
    "dynamics_residual",
    "exp_decay",
    "hamiltonian_sup",
    "holder_pairing_check",
    "improper_integral",
    "improper_verdict",
    "parse_expression",
    "parse_problem",
    "pontryagin_H",
    "pontryagin_H_u",
    "pontryagin_H_x",
    "power",
    "slater_check",
    "solve_ode",
    "solve_state",
    "verify_certificate",
    "weibull",
    "weighted_norm",
    "__version__",
]
