"""Error hierarchy shared by the solvers and the management commands.

Every error carries the process exit code the command line reports for it:
1 for validation problems, 2 for numerical failures. I/O failures are plain
``OSError`` and map to 3.
"""

EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


class BarycenterError(Exception):
    exit_code = EXIT_NUMERICAL


class ValidationFailure(BarycenterError):
    exit_code = EXIT_VALIDATION


class NumericalFailure(BarycenterError):
    exit_code = EXIT_NUMERICAL


class RejectedSchedule(ValidationFailure):
    def __init__(self, reason):
        super().__init__(f"Rejected step schedule: {reason}")
        self.reason = reason


class InvalidConfig(ValidationFailure):
    pass


class InvalidSpec(ValidationFailure):
    pass


class InvalidPopulation(ValidationFailure):
    pass


class RequiresFiniteSupport(ValidationFailure):
    def __init__(self, operation):
        super().__init__(f"{operation} requires a finitely supported population")


class GridMismatch(ValidationFailure):
    pass


class DimensionMismatch(ValidationFailure):
    pass


class CopulaMismatch(ValidationFailure):
    pass


class GeneratorMismatch(ValidationFailure):
    pass


class EmptySample(ValidationFailure):
    pass


class EmptyBatch(ValidationFailure):
    def __init__(self):
        super().__init__("An SGD step needs at least one sampled measure")


class NonpositiveStd(ValidationFailure):
    pass


class IngestError(ValidationFailure):
    pass


class EmptyFile(IngestError):
    def __init__(self, path):
        super().__init__(f"{path}: no observations")
        self.path = path


class RaggedRows(IngestError):
    def __init__(self, path, row, expected, found):
        super().__init__(f"{path}: row {row} has {found} columns, expected {expected}")
        self.path = path
        self.row = row


class NonNumeric(IngestError):
    def __init__(self, path, row, col, value):
        super().__init__(f"{path}: non-numeric value {value!r} at row {row}, column {col}")
        self.path = path
        self.row = row
        self.col = col


class NotSpd(NumericalFailure):
    pass


class CrossCheckFailed(NumericalFailure):
    """Two closed forms of the same quantity disagree beyond tolerance."""


class MaxIterExceeded(NumericalFailure):
    """Fixed-point iteration ran out of iterations; keeps the best iterate."""

    def __init__(self, best, residual, iterations):
        super().__init__(
            f"Fixed-point iteration did not converge in {iterations} iterations "
            f"(best residual {residual:.3e})"
        )
        self.best = best
        self.residual = residual
        self.iterations = iterations


class InvalidMeasure(ValidationFailure):
    pass
