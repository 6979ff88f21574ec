from __future__ import annotations


def _rebuild(cls: type, args: tuple, state: dict) -> "StringLabError":
    err = cls.__new__(cls)
    Exception.__init__(err, *args)
    err.__dict__.update(state)
    return err


class StringLabError(Exception):
    """Base class for every error raised by the laboratory.

    Subclasses take keyword-only context, so pickling rebuilds the instance from
    its final message and attributes instead of calling ``__init__`` again. Errors
    raised inside sweep worker processes reach the parent intact.
    """

    def __reduce__(self):
        return _rebuild, (type(self), self.args, dict(self.__dict__))


class DomainError(StringLabError, ValueError):
    """Raised when an argument lies outside the admissible domain of an operation."""


class ConfigurationError(StringLabError, ValueError):
    """Raised when a sweep, manifest or operation precondition is violated."""


class SpecParseError(StringLabError):
    """Raised when a problem spec file cannot be parsed or validated."""

    def __init__(
        self,
        message: str,
        *,
        path: str | None = None,
        line: int | None = None,
        column: int | None = None,
        field: str | None = None,
    ) -> None:
        self.path = path
        self.line = line
        self.column = column
        self.field = field
        super().__init__(message)

    def __str__(self) -> str:
        where = []
        if self.path:
            where.append(self.path)
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.column is not None:
            where.append(f"column {self.column}")
        if self.field:
            where.append(f"field '{self.field}'")
        prefix = ", ".join(where)
        message = super().__str__()
        return f"{prefix}: {message}" if prefix else message


class NumericalFailure(StringLabError):
    """Raised when a numerical procedure cannot deliver a trustworthy result."""


class BracketingError(NumericalFailure):
    """Raised when an eigenvalue cannot be bracketed."""

    def __init__(self, message: str, *, index: int) -> None:
        self.index = index
        super().__init__(f"{message} (suspect index {index})")


class NearSingularError(NumericalFailure):
    """Raised when a spectral parameter is too close to an eigenvalue."""

    def __init__(self, message: str, *, zeta: complex, eigenvalue: float | None = None) -> None:
        self.zeta = zeta
        self.eigenvalue = eigenvalue
        super().__init__(message)


class DegenerateDataError(NumericalFailure):
    """Raised when a quantity that must be nonzero is numerically zero."""

    def __init__(self, quantity: str, value: float) -> None:
        self.quantity = quantity
        self.value = value
        super().__init__(f"{quantity} is numerically zero ({value:.3e})")
