"""Exception types shared across the package."""


class ConceptDiffError(Exception):
    """Base class for every error raised by this package."""


class ParseError(ConceptDiffError):
    """Malformed input file; carries the path and 1-based line number."""

    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class UnknownConceptError(ConceptDiffError, LookupError):
    """A concept id or IRI that was never interned."""


class UnknownIndividualError(ConceptDiffError, LookupError):
    """An individual id or IRI missing from the membership index."""


class UnknownItemError(ConceptDiffError, LookupError):
    """An item name absent from a fitted pairwise model."""


class InternalInvariantError(ConceptDiffError):
    """A structure that callers may not mutate was found inconsistent."""


class CandidateSpaceError(ConceptDiffError):
    """The exhaustive oracle refused: candidate space exceeds its cap."""


class InsufficientConceptsError(ConceptDiffError):
    """No concept survived deduplication and filtering of a ranking."""


class NoExplanationError(ConceptDiffError):
    """Induction produced no candidates (nothing covers any positive)."""


class TrainingError(ConceptDiffError):
    """The classifier cannot be trained on the provided data."""


class EstimatorError(ConceptDiffError):
    """Base class for statistical-fit failures (maps to CLI exit code 3)."""


class DisconnectedTallyError(EstimatorError):
    """Pairwise comparison graph does not connect every item."""

    def __init__(self, isolated, message=None):
        self.isolated = tuple(isolated)
        super().__init__(
            message
            or "comparison graph is disconnected; unreachable items: "
            + ", ".join(self.isolated)
        )


class QuasiSeparationError(EstimatorError):
    """Win pattern admits no finite maximum-likelihood fit at penalty 0."""


class ConvergenceError(EstimatorError):
    """Iterative fit did not reach the requested tolerance."""


class DegenerateRateError(EstimatorError):
    """A hit or false-alarm rate of exactly 0 or 1 with correction disabled."""
