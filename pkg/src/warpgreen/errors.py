"""Exception hierarchy shared across the package."""


class WarpGreenError(Exception):
    """Base class for all package errors."""


class NumericalError(WarpGreenError):
    """A numerical routine could not deliver a trustworthy value."""


class NonConvergent(NumericalError):
    pass


class NonFinite(NumericalError):
    pass


class Unbounded(NumericalError):
    pass


class DegenerateFit(NumericalError):
    pass


class TailDivergence(NumericalError):
    pass


class GridTooCoarse(NumericalError):
    pass


class DomainError(WarpGreenError, ValueError):
    """An argument lies outside the domain of an operation."""


class NegativeRadius(DomainError):
    pass


class InvalidAnnulus(DomainError):
    pass


class BelowAnchor(DomainError):
    pass


class LevelOutOfRange(DomainError):
    pass


class InvalidExponents(DomainError):
    pass


class InvalidManifold(DomainError):
    pass


class ParabolicManifold(WarpGreenError):
    pass


class NotCartanHadamard(WarpGreenError):
    pass


class DegenerateTestFunction(WarpGreenError):
    pass


class ConfigError(WarpGreenError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(field)
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{': '.join([', '.join(where), message]) if where else message}")
