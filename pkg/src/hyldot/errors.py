"""Exception types shared across the package."""

from hyldot.basis import DomainError


class ContractViolation(ValueError):
    """Input does not satisfy an operation's documented precondition."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical method on valid input."""


class IllConditionedOverlap(NumericalError):
    """Cholesky factorization of the overlap matrix broke down.

    Usually the basis is too large for the working precision.  ``certain``
    is False when an extended-precision pivot merely straddled zero, i.e.
    the inputs were not carried to enough digits.
    """

    def __init__(self, pivot: int, condition: float, mu: float | None = None, certain: bool = True):
        self.pivot = pivot
        self.condition = condition
        self.mu = mu
        self.certain = certain
        msg = f"overlap Cholesky breakdown at pivot {pivot} (condition estimate {condition:.3g})"
        if mu is not None:
            msg += f" for mu={mu:g}"
        super().__init__(msg)

    def with_mu(self, mu: float) -> "IllConditionedOverlap":
        return IllConditionedOverlap(self.pivot, self.condition, mu, self.certain)


class PairingDefect(NumericalError):
    """Singular values of an antisymmetric kernel failed to pair up."""


class ResolutionError(NumericalError):
    """A grid-extrapolated quantity did not converge to tolerance."""


class BracketError(NumericalError):
    """A root-finding bracket does not contain a sign change."""


__all__ = [
    "BracketError",
    "ContractViolation",
    "DomainError",
    "IllConditionedOverlap",
    "NumericalError",
    "PairingDefect",
    "ResolutionError",
]
