"""Exception hierarchy shared by all fiberpol modules."""


class FiberpolError(Exception):
    """Base class. ``stage`` names the pipeline step that raised, if known."""

    stage = None

    def __str__(self):
        msg = super().__str__()
        if self.stage:
            return f"[{self.stage}] {msg}"
        return msg


class DomainError(FiberpolError, ValueError):
    """Input outside the domain of an operation (negative length, non-physical matrix, ...)."""


class IllPosedError(DomainError):
    """The measurement set cannot determine the requested quantity."""


class AmbiguityError(DomainError):
    """Several answers are equally consistent with the data and the prior."""


class InsufficientDataError(DomainError):
    pass


class SchemaError(FiberpolError):
    """A file or JSON payload does not follow the documented schema."""


def tag_stage(exc, stage):
    """Attach ``stage`` to ``exc`` unless an inner stage is already recorded."""
    if isinstance(exc, FiberpolError) and exc.stage is None:
        exc.stage = stage
    return exc
