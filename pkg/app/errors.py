"""Exceptions raised by the hypothesis test designer."""
from pathlib import Path
from typing import Optional, Union


class HypothesisDesignError(Exception):
    """Base class for every error raised by the library."""


class InputError(HypothesisDesignError, ValueError):
    """An argument is outside the domain of the operation."""


class MismatchedBaseMeasureError(InputError):
    """Two models that must share a base measure do not."""


class ImpossibleObservationError(InputError):
    """An observation has zero density under both hypotheses."""


class EnumerationLimitError(InputError):
    """Exhaustive enumeration was asked for more atoms than the guard allows."""


class UnsupportedReductionError(HypothesisDesignError):
    """No closed-form sufficient-statistic reduction exists for the pair."""


class NotAnalyticallyEvaluableError(HypothesisDesignError):
    """Error rates for this test/pair can only be estimated by simulation."""


class DiscretizationError(HypothesisDesignError):
    """A grid does not capture enough probability mass."""


class ScenarioParseError(InputError):
    """A scenario file is malformed; carries the file, line and field."""

    def __init__(self, message: str, path: Union[str, Path, None] = None,
                 line: Optional[int] = None, field: Optional[str] = None):
        self.path = str(path) if path is not None else None
        self.line = line
        self.field = field
        prefix = ""
        if self.path:
            prefix = f"{self.path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        if field:
            prefix += f"{field}: "
        super().__init__(prefix + message)
