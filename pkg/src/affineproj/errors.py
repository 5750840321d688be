"""Exception hierarchy shared by the library and the CLI.

Each class carries the CLI exit code it maps to.
"""


class AffineProjError(Exception):
    exit_code = 1


class ConfigError(AffineProjError, ValueError):
    exit_code = 2


class MathPreconditionError(AffineProjError, ValueError):
    """A mathematical hypothesis required by an operation does not hold."""

    exit_code = 3


class NonContracting(MathPreconditionError):
    def __init__(self, indices, norms):
        self.indices = list(indices)
        self.norms = list(norms)
        detail = ", ".join(f"map {i} has norm {n:.6g}" for i, n in zip(self.indices, self.norms))
        super().__init__(f"maps are not contracting: {detail}")


class NotStrictlyPositive(MathPreconditionError):
    pass


class InputNotPositive(MathPreconditionError):
    pass


class DiskInvarianceError(MathPreconditionError):
    pass


class SingularMatrix(MathPreconditionError, ZeroDivisionError):
    pass


class EstimateNotContracting(MathPreconditionError):
    pass


class ExceptionalDirection(MathPreconditionError):
    pass


class BracketError(MathPreconditionError):
    pass


class BudgetExceeded(AffineProjError):
    exit_code = 4


class SequenceExhausted(AffineProjError, IndexError):
    pass
