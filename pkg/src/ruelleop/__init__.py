"""Transfer-operator calculus for entire maps of the shape P1 + P2(sin(P3)).

The library evaluates the operator in closed form on rational kernels with
poles at 0, 1 and a base point, sums the associated orbit series, classifies
critical orbits for summability, and computes the relation coefficients
whose non-triviality witnesses structural instability, with independent
inverse-branch and plane-quadrature oracles for every major identity.
"""

from .checks import BumpField, CheckResult, contraction_check, duality_check, neumann_bound_check
from .errors import (
    ConditioningError,
    DegeneracyError,
    EnumerationError,
    EvaluationOverflowError,
    NonSimpleCriticalPointError,
    NormalizationError,
    PoleCollisionError,
    PoleEvaluationError,
    QuadratureConfigError,
    RuelleOpError,
    SummabilityPreconditionError,
    UnsupportedBranchStructureError,
)
from .gamma import GammaCombination, QuadratureConfig, beltrami_pullback, combo_eval, gamma_eval, l1_norm
from .maps import (
    BOUNDED,
    UNBOUNDED,
    UNDECIDED,
    CriticalData,
    CriticalEntry,
    EntireMap,
    OrbitData,
    conjugate_by_affine,
    critical_data,
    critical_points,
    fixed_points,
    normalize,
    orbit,
    residue_check,
    winding_count,
)
from .presets import LandingPreset, landing_preset
from .relation import (
    DefectResult,
    LineFieldSystem,
    RelationCoefficient,
    RelationReport,
    TransportResult,
    fixed_point_defect,
    instability_verdict,
    line_field_system,
    mobius_transport,
    relation_coefficients,
    truncated_orbit_combination,
)
from .series import (
    LimitTrend,
    SeriesEval,
    ValueSystem,
    build_value_system,
    limit_x_to_1,
    poincare_series,
    poincare_series_at,
    resolvent_by_neumann,
    resolvent_by_system,
)
from .summability import (
    NOT_SUMMABLE,
    SUMMABLE,
    SummabilityReport,
    classify,
    classify_value,
    separation_diagnostics,
)
from .transfer import BranchSum, BranchWindow, apply, apply_direct, iterate, preimages

__version__ = "0.1.0"
