"""Exception hierarchy.

Every numerical refusal raises a subclass of :class:`DynRMatError` so that
callers (and the CLI) can distinguish bad input from failed checks.
"""


class DynRMatError(Exception):
    """Base class for all errors raised by this package."""


class AlgebraError(DynRMatError):
    """Structure constants or bilinear form fail a Lie algebra axiom."""

    def __init__(self, message, witness=None, residual=None):
        super().__init__(message)
        self.witness = witness
        self.residual = residual


class AsymmetryFailure(AlgebraError):
    pass


class JacobiViolation(AlgebraError):
    pass


class NondegeneracyFailure(AlgebraError):
    pass


class InvarianceFailure(AlgebraError):
    pass


class AutomorphismError(AlgebraError):
    pass


class FixedPointEmpty(DynRMatError):
    pass


class PoleProximity(DynRMatError):
    def __init__(self, point, pole, distance=None, what=""):
        msg = f"{what + ': ' if what else ''}argument {point!r} lies within {distance!r} of pole {pole!r}"
        super().__init__(msg)
        self.point = point
        self.pole = pole
        self.distance = distance


class DerivativeUnavailable(DynRMatError):
    pass


class DefectiveInput(DynRMatError):
    pass


class InvalidTau(DynRMatError):
    pass


class DomainViolation(DynRMatError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class StripViolation(DomainViolation):
    pass


class CutoffOverflow(DynRMatError):
    def __init__(self, m, n, cutoff):
        super().__init__(f"bracket of grades {m} and {n} leaves the window |n| <= {cutoff}")
        self.grades = (m, n)
        self.cutoff = cutoff


class InvalidQ(DynRMatError):
    pass


class NotInnerData(DynRMatError):
    pass


class InconsistentSpectralParams(DynRMatError):
    pass


class ConfigError(DynRMatError):
    """Invalid command line or config-file input (CLI exit code 2)."""
