"""Exception hierarchy for the dynamics engine."""

from __future__ import annotations


class HyperlabError(Exception):
    """Base class for every error raised by hyperlab."""


class PreconditionError(HyperlabError, ValueError):
    """An operation was called outside its documented domain."""


class MatrixFormatError(PreconditionError):
    """A matrix literal or document could not be parsed."""


class NotUnimodular(PreconditionError):
    """Integer matrix with |det| != 1."""


class NotHyperbolic(PreconditionError):
    """Some eigenvalue lies on (or too close to) the unit circle."""


class NonRealSpectrum(PreconditionError):
    """Complex eigenvalues are not supported."""


class DimensionTooLarge(PreconditionError):
    """Exact algebra is only supported up to dimension 6."""


class PerturbationTooLarge(PreconditionError):
    """Certified C1 bound exceeds the configured threshold."""


class NumericFailure(HyperlabError, RuntimeError):
    """Base class for failures of a numerical procedure."""


class ProfileNotAchieved(NumericFailure):
    """A Katok family did not reach the requested exponent spread."""


class OrbitEscapedPrecision(NumericFailure):
    """QR re-orthonormalization lost conditioning."""


class ConeCollapse(NumericFailure):
    """Cone iteration could not resolve the dominated splitting."""


class StepRejected(NumericFailure):
    """Leaf tracing needed a step below the minimum step size."""


class TraceTooShort(NumericFailure):
    """A leaf quantity needs more leaf than was traced."""


class NoConvergence(NumericFailure):
    """A series or iteration did not reach its tolerance."""


class NewtonDiverged(NumericFailure):
    """Newton iteration failed to converge from its seed."""


class FitUnstable(NumericFailure):
    """An affine fit had too few points or too low R^2."""
