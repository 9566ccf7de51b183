"""Exception hierarchy shared by all modules."""


class GLDualError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(GLDualError, ValueError):
    """A parameter set or experiment config violates a stated invariant."""


class DomainError(GLDualError, ValueError):
    """A closed-form expression was evaluated outside its domain of validity."""


class InfeasibleError(GLDualError, ValueError):
    """No admissible point exists for the requested sub-problem."""


class ConvergenceError(GLDualError, RuntimeError):
    """An iterative method failed to meet its tolerance."""
