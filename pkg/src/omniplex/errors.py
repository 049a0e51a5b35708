"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes): ``ValidationError``
for bad inputs or parameters, and ``NumericalError`` for computations that
cannot proceed on valid inputs.
"""


class OmniplexError(Exception):
    pass


class ValidationError(OmniplexError, ValueError):
    pass


class NumericalError(OmniplexError, ArithmeticError):
    pass


class InvalidMatrix(ValidationError):
    pass


class InvalidInput(ValidationError):
    pass


class InvalidArgument(ValidationError):
    pass


class NotPSD(ValidationError):
    pass


class ProbabilityOutOfRange(ValidationError):
    pass


class InvalidProbability(ValidationError):
    pass


class DegenerateWeights(ValidationError):
    pass


class UnsupportedArity(ValidationError):
    pass


class Unsupported(ValidationError):
    pass


class AlignmentError(ValidationError):
    pass


class SingularScaling(ValidationError):
    """A method's variance needs 1/sqrt(C_ii) with C_ii == 0."""


class RankDeficient(NumericalError):
    def __init__(self, d_requested, d_found):
        self.d_requested = d_requested
        self.d_found = d_found
        super().__init__(
            f"requested {d_requested} positive eigenvalues, found {d_found}"
        )


class SingularMoment(NumericalError):
    pass


class SingularCovariance(NumericalError):
    pass


class DegenerateComponent(NumericalError):
    pass


class CalibrationFailed(NumericalError):
    pass
