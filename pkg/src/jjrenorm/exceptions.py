"""Exception types shared across the package."""


class JJRenormError(Exception):
    """Base class for all package-specific errors."""


class NonRealCritical(JJRenormError):
    """A critical point left the real axis: the polynomial is inadmissible."""


class DegenerateCritical(JJRenormError):
    """A multiple critical point (root of T' within tolerance)."""


class ComplexPreimage(JJRenormError):
    """A preimage computation produced non-real roots."""


class TooCloseToSpectrum(JJRenormError):
    """Resolvent evaluation requested inside the exclusion zone."""


class SignViolation(JJRenormError):
    """A branch value came back with the wrong sign."""


class NonRealBlockSpectrum(JJRenormError):
    """Block polynomial has non-real roots: invalid branch input."""


class NegativeWeight(JJRenormError):
    """A reconstructed measure has a non-positive weight."""


class PositivityViolation(JJRenormError):
    """An off-diagonal entry that must be positive is not."""


class SingularPencil(JJRenormError):
    """2x2 resolvent inversion is ill-conditioned."""


class DisjointWindows(JJRenormError):
    """Two coefficient windows do not overlap."""


class WindowExhausted(JJRenormError):
    """The requested iteration count exceeds the window budget."""


class NonConvergence(JJRenormError):
    """An iterative procedure failed to converge within its budget."""


class NonzeroDiagonal(JJRenormError):
    """Even/odd splitting requires a vanishing main diagonal."""
