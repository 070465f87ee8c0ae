"""Exception types shared across the engine."""


class SemsphereError(Exception):
    """Base class for all engine errors."""


class ZeroVector(SemsphereError, ValueError):
    """A vector has no extractable direction."""


class DimensionMismatch(SemsphereError, ValueError):
    pass


class ToleranceOutOfRange(SemsphereError, ValueError):
    pass


class ContradictionError(SemsphereError):
    """Witnesses do not fit in any open hemisphere; interpretation must refuse.

    The failing :class:`~semsphere.admissibility.FeasibilityCertificate` is kept
    on ``certificate`` so callers can record why.
    """

    def __init__(self, certificate, message: str = "Evidence contradicts"):
        self.certificate = certificate
        super().__init__(message)


class EmptySampleBudget(SemsphereError):
    pass


class UnreliableEstimate(SemsphereError):
    """A Monte-Carlo volume is too noisy to quote."""


class ConfigParseError(SemsphereError, ValueError):
    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class MissingExtractor(SemsphereError, KeyError):
    pass


class EmptySet(SemsphereError, ValueError):
    pass


class BothEmpty(EmptySet):
    pass
