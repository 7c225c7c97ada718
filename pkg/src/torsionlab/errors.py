"""Exception hierarchy."""


class TorsionLabError(Exception):
    """Base class for every error raised by the library."""


class ConditioningError(TorsionLabError):
    pass


class NotPSDError(TorsionLabError):
    pass


class SingularMapError(TorsionLabError):
    pass


class InvalidFiltrationError(TorsionLabError):
    pass


class ValidationError(TorsionLabError):
    """A named invariant does not hold."""

    def __init__(self, invariant: str, message: str = "", residual: float | None = None):
        self.invariant = invariant
        self.residual = residual
        text = f"{invariant}: {message}" if message else invariant
        if residual is not None:
            text += f" (residual {residual:.3e})"
        super().__init__(text)


class InvalidSESError(ValidationError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__("ses_compatibility", message, residual)


class InvalidInstantonError(ValidationError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__("instanton_relation", message, residual)


class InconsistentLiftError(TorsionLabError):
    """A page differential could not be lifted; earlier pages are corrupt."""


class ModelError(TorsionLabError):
    pass


class IncompleteLedgerError(TorsionLabError):
    pass


class DocumentError(TorsionLabError):
    """Parse or schema error in an input document."""

    def __init__(self, message: str, path: str = "", line: int | None = None, column: int | None = None):
        self.path = path
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" at line {line}, column {column}"
        elif path:
            where = f" at {path}"
        super().__init__(message + where)
