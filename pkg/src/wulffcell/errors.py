"""Exception types shared by the solvers and the CLI."""


class WulffcellError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InputError(WulffcellError, ValueError):
    """Malformed or inadmissible input.

    ``code`` is a short machine-readable tag such as ``"negative-weight"``
    or ``"disconnected"``.
    """

    exit_code = 2

    def __init__(self, message, code="invalid-input"):
        super().__init__(f"[{code}] {message}")
        self.code = code


class ModelInvariantError(WulffcellError):
    """An internal invariant of the interaction model was violated."""

    exit_code = 2


class IterativeFailure(WulffcellError, RuntimeError):
    """An iterative solver hit its budget before reaching tolerance."""

    exit_code = 3

    def __init__(self, message, gap=float("nan"), iterations=0):
        super().__init__(f"{message} (gap={gap:.3e}, iterations={iterations})")
        self.gap = gap
        self.iterations = iterations


class NumericalDegeneracy(WulffcellError):
    """Raised when an adaptive procedure cannot resolve a feature."""

    exit_code = 3
