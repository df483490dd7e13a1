"""Exception types shared across the toolkit."""


class QilpError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(QilpError, ValueError):
    """Inputs have inconsistent shapes."""


class IterationLimitError(QilpError):
    """A solver hit its iteration budget before reaching a verdict.

    Distinct from infeasibility: no claim is made about the problem.
    """


class UnboundedProblemError(QilpError):
    """An LP that was assumed bounded is not."""


class SolverError(QilpError):
    """Numerical failure inside an LP/MIP engine."""


class InverseInfeasibleError(QilpError):
    """No cost vector puts enough observations within the error threshold.

    Carries the smallest threshold that would restore feasibility, when the
    caller computed one.
    """

    def __init__(self, message, min_tau=None):
        super().__init__(message)
        self.min_tau = min_tau


class CertificationError(QilpError):
    """A solution failed its own post-solve feasibility certificate."""
