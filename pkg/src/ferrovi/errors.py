class FerroviError(Exception):
    """Base class for all package errors."""


class SaturationReached(FerroviError):
    """Remanent polarization reached the saturation margin of the saturating model."""

    def __init__(self, message: str = "remanent polarization reached saturation", element: int | None = None):
        self.element = element
        if element is not None:
            message = f"{message} (element {element})"
        super().__init__(message)


class NoConvergence(FerroviError):
    def __init__(self, iterations: int, residual: float, step: int | None = None):
        self.iterations = iterations
        self.residual = residual
        self.step = step
        where = f" at load step {step}" if step is not None else ""
        super().__init__(f"Newton did not converge in {iterations} iterations{where} (residual {residual:.3e})")


class SingularSystem(FerroviError):
    """The linearized saddle-point system could not be factorized."""


class ConfigError(FerroviError):
    pass


class ParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ConfigError):
    def __init__(self, field: str, message: str | None = None):
        self.field = field
        super().__init__(field if message is None else f"{field}: {message}")
