from typing import Optional


class GibbsError(Exception):
    pass


class DimensionMismatchError(GibbsError, ValueError):
    def __init__(self, expected: int, actual: int) -> None:
        super().__init__(f"Expected dimension {expected}, got {actual}")

        self.expected = expected
        self.actual = actual


class OverlapError(GibbsError, ValueError):
    pass


class UnsupportedDimensionError(GibbsError, ValueError):
    pass


class ModelError(GibbsError, ValueError):
    pass


class DivergentTailError(ModelError):
    pass


class InfiniteEnvironmentError(GibbsError):
    pass


class RejectionExhaustedError(GibbsError):
    def __init__(self, attempts: int) -> None:
        super().__init__(f"No proposal accepted after {attempts:,} attempts, the window or activity is too large for the rejection sampler")

        self.attempts = attempts


class SamplerSpecError(GibbsError, ValueError):
    pass


class DiagnosticsPreconditionError(GibbsError):
    pass


class MarginViolationError(DiagnosticsPreconditionError):
    pass


class DegenerateNormalizationError(DiagnosticsPreconditionError):
    pass


class EmptySampleSetError(DiagnosticsPreconditionError):
    pass


class ConfigError(GibbsError):
    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None) -> None:
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(field)

        super().__init__(f"{', '.join(location)}: {message}" if location else message)

        self.message = message
        self.field = field
        self.line = line
