"""Exception hierarchy shared by every module."""


class RBSurveyError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(RBSurveyError):
    """A required column or config key is missing or malformed."""


class ParseError(RBSurveyError):
    """A data cell could not be parsed as a finite real number."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class DomainError(RBSurveyError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class UndefinedVarianceError(RBSurveyError):
    """A variance estimator was evaluated on a sample that is too small."""


class ImpossibleSampleError(RBSurveyError):
    """The observed data has probability zero under every candidate strategy."""


class EnumerationLimitError(RBSurveyError):
    """An exact enumeration would exceed its configured size cap."""


class FixtureError(RBSurveyError):
    """A bundled or user-supplied dataset is missing or fails validation."""


class StudyError(RBSurveyError):
    """A Monte Carlo study could not complete (e.g. too many aborted replicates)."""
