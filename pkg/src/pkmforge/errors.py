"""Exception types shared across the toolkit."""


class PkmforgeError(Exception):
    """Base class for every error raised by this package."""


class Infeasible(PkmforgeError):
    """A pose is unreachable or a design cannot satisfy its constraints."""


class NoConvergence(PkmforgeError):
    """An iterative solver hit its iteration cap or a singular iterate."""


class Singular(PkmforgeError):
    """A matrix is too ill-conditioned for a reliable inverse."""


class SingularJacobian(Singular):
    """The manipulator Jacobian cannot be inverted at this pose."""


class SingularSystem(Singular):
    """The chain force/deflection system is rank deficient."""


class SingularStiffness(Singular):
    """The aggregated stiffness matrix cannot be solved against."""


class DimensionMismatch(PkmforgeError):
    """Grid and mask shapes disagree."""


class TooLarge(PkmforgeError):
    """Input exceeds a guard bound meant to prevent runaway cost."""


class EmptyInput(PkmforgeError):
    """An operation that needs at least one element got none."""
