"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to converge or lost too much precision."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        extra = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
        return f"{base} ({extra})"


class ConfigError(ValueError):
    """A design or run configuration is invalid."""


class InfeasibleError(RuntimeError):
    """No design in the searched range meets the calibration constraints."""

    def __init__(self, message, closest=None):
        super().__init__(message)
        self.closest = closest
