"""Exception hierarchy for the package."""


class RuelleOpError(Exception):
    """Base class for all package errors."""


class EvaluationOverflowError(RuelleOpError):
    """Map evaluation produced a non-finite value from finite input."""


class EnumerationError(RuelleOpError):
    """Located critical points disagree with the argument-principle count."""


class NonSimpleCriticalPointError(RuelleOpError):
    """A critical point with |f''(c)| below tolerance (degenerate residue)."""


class NormalizationError(RuelleOpError):
    """Could not conjugate the map to fix 0 and 1."""


class PoleEvaluationError(RuelleOpError):
    """Kernel evaluated at (or too close to) one of its poles."""

    def __init__(self, message, pole=None):
        super().__init__(message)
        self.pole = pole


class PoleCollisionError(RuelleOpError):
    """An operator image base landed on 0 or 1 where the kernel is undefined."""


class DegeneracyError(RuelleOpError):
    """Orbit or base point too close to a pole or critical point."""


class UnsupportedBranchStructureError(RuelleOpError):
    """Inverse-branch enumeration requires constant P1 and linear P2."""


class ConditioningError(RuelleOpError):
    """Linear system over critical values is too ill-conditioned to solve."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class QuadratureConfigError(RuelleOpError):
    """Invalid plane-quadrature configuration (overlapping patches etc.)."""


class SummabilityPreconditionError(RuelleOpError):
    """Operation requires a summable base point but classification failed."""
