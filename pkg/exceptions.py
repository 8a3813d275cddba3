"""
Exception hierarchy for the SRBM product-form toolkit
Every error raised on purpose by the library derives from SrbmError
"""

from typing import Optional, Sequence


class SrbmError(Exception):
    "Base class for errors raised by the toolkit."
    pass


class InvalidMatrix(SrbmError):
    "Raised when an input is not a finite square matrix."
    pass


class SingularMatrix(SrbmError):
    "Raised when a matrix is singular within tolerance."
    pass


class SingularR(SingularMatrix):
    "Raised when the reflection matrix R is singular."
    pass


class DimensionTooLarge(SrbmError):
    "Raised when an exhaustive subset enumeration would exceed the supported dimension."
    pass


class NotSymmetric(SrbmError):
    "Raised when a matrix that must be symmetric is not."
    pass


class InvalidSigma(SrbmError):
    "Raised when the covariance matrix is not positive definite."
    pass


class IndexOutOfRange(SrbmError):
    "Raised when a coordinate index is outside 0..d-1."
    pass


class DegeneratePair(SrbmError):
    "Raised when c_ij = det(A^ij) vanishes, so f^ij is not defined."
    pass


class EmptySlice(SrbmError):
    "Raised when the slice quadratic is not an ellipse."
    pass


class ZeroDiagonalR(SrbmError):
    "Raised when R has a zero diagonal entry."
    pass


class DomainError(SrbmError):
    "Raised when a moment generating function is evaluated outside theta < alpha."
    pass


class NotPMatrix(SrbmError):
    "Raised when an operation requires R to be a P-matrix."
    pass


class InvalidSpec(SrbmError):
    "Raised when tandem primitives are infeasible."
    pass


class NotProductForm(SrbmError):
    "Raised when a closed form needs the product-form condition and it fails."
    pass


class InfeasiblePath(SrbmError):
    "Raised when the conjectured path cannot be built for the requested target."
    pass


class InstanceError(SrbmError):
    "Raised when an instance file is malformed."
    pass


class LcpRayTermination(SrbmError):
    """Raised when Lemke's method ends on a secondary ray.

    The offending right-hand side is kept on the exception so callers can
    retry with a finer step.
    """

    def __init__(self, message: str, w: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.w = None if w is None else [float(v) for v in w]
