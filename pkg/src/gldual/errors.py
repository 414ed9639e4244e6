"""Exception hierarchy shared by every gldual module."""


class GLDualError(Exception):
    """Base class for all errors raised by gldual."""


class GridMismatch(GLDualError, ValueError):
    """Two fields (or a field and an operator) live on different grids."""


class RegimeMismatch(GLDualError, ValueError):
    """An operation was called in the wrong boundary regime."""


class BoundaryViolation(GLDualError, ValueError):
    """A Dirichlet-regime field has non-zero boundary values."""


class NonSolvable(GLDualError):
    """A Neumann Poisson problem was given a right-hand side with non-zero mean."""


class DomainError(GLDualError):
    """A functional was evaluated outside its domain of definition."""


class DenominatorNonPositive(DomainError):
    """The dual weight K = -2 v0* + eps is not positive at some node."""

    def __init__(self, node, value):
        self.node = int(node)
        self.value = float(value)
        super().__init__(f"K = {value:.6g} <= 0 at node {node}")


class SupNotAttained(DomainError):
    """The supremum defining a conjugate is +inf (2 v0* + K <= 0 at a node)."""

    def __init__(self, node, value):
        self.node = int(node)
        self.value = float(value)
        super().__init__(f"2 v0* + K = {value:.6g} <= 0 at node {node}; sup is +inf")


class EvaluationFailure(GLDualError):
    """A finite-difference probe could not be evaluated even after step shrinking."""


class NonSymmetric(GLDualError, ValueError):
    """An operator handed to a symmetric eigensolver is not self-adjoint."""


class NoConvergence(GLDualError):
    """Newton iteration hit max_iter; ``result`` holds the best iterate."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


class ConfigError(GLDualError):
    """Malformed or inconsistent run configuration."""
