"""Exception hierarchy shared across the package."""


class ApefError(Exception):
    """Base class for all package errors."""


class NoRiseFallPattern(ApefError):
    """No qualifying rising run followed by a falling run was found."""


class DegenerateRanking(ApefError):
    """A rank vector has zero variance, so rank correlation is undefined."""


class DegenerateAgreement(ApefError):
    """Expected agreement is 1, so Fleiss' kappa is undefined."""


class DegenerateObservation(ApefError):
    """Observation series has zero mean or variance where a nonzero one is required."""


class InvalidParams(ApefError, ValueError):
    """Parameters outside their documented ranges."""


class TransportError(ApefError):
    """Live adapter failed after exhausting retries."""


class ScriptExhausted(ApefError):
    """Scripted adapter has no more queued responses."""


class TagMismatch(ApefError):
    """Scripted adapter received a request with an unexpected tag."""


class ParseFailure(ApefError):
    """Model response did not contain the expected structured payload."""


class SchemaViolation(ApefError):
    """Policy JSON violates the schema; message names the offending field."""


class PointSumError(SchemaViolation):
    """Policy point allocations do not sum to the required total."""


class FormulaSyntaxError(ApefError):
    """Formula text failed to parse; carries the character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvaluationError(ApefError):
    """Formula evaluation hit an undefined operation (e.g. division by zero)."""


class Unrepairable(ApefError):
    """Proposed weights cannot be projected onto the feasible set."""


class InsufficientPairs(ApefError):
    """Fewer labeled pairs than the screening protocol requires."""


class UnresolvedTie(ApefError):
    """Majority vote split evenly with no tie-break rater configured."""


class AdapterFailure(ApefError):
    """Training aborted because the adapter failed irrecoverably."""


class UnknownSession(ApefError):
    """Annotation session id not found."""


class UnknownPair(ApefError):
    """Pair id not part of the session's queue."""


class UnknownDataset(ApefError):
    """Requested dataset/task is not loaded."""


class AlreadyVoted(ApefError):
    """A different choice was already recorded for this pair."""
