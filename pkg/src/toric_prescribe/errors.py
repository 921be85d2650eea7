"""Exception types shared across the package."""


class ToricError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(ToricError, ValueError):
    """A parameter lies outside its admissible range."""


class DegeneratePolytopeError(ToricError, ValueError):
    """A polytope (or its shrunken version) has empty interior or a redundant facet."""


class SingularEvaluationError(ToricError, ValueError):
    """A quantity was evaluated on or outside the boundary where it is singular."""


class NonConvexPointError(ToricError, ValueError):
    """The Hessian of the symplectic potential is not positive definite."""


class InfeasibleError(ToricError):
    """A candidate parameter vector cannot be evaluated (used by the optimizer)."""


class BracketError(ToricError, RuntimeError):
    """A root finder could not bracket or converge to a root."""


class CoefficientFileError(ToricError, ValueError):
    """A coefficient file is malformed or has an unsupported version."""
