"""Exception hierarchy shared across the package.

Every exception carries a short machine-readable ``code`` that the command
line tool prints on failure.
"""


class DicaError(Exception):
    code = "error"


class InputError(DicaError, ValueError):
    """Malformed or inconsistent input data."""

    code = "input_error"


class ConfigError(DicaError, ValueError):
    """Invalid hyperparameters or configuration."""

    code = "config_error"


class DefinitenessError(DicaError, ArithmeticError):
    """A matrix expected to be positive definite is not."""

    code = "definiteness_error"

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class SpectrumError(DicaError, ArithmeticError):
    """Selected eigenvalues carry an imaginary part above tolerance."""

    code = "spectrum_error"

    def __init__(self, message, max_imag=None):
        super().__init__(message)
        self.max_imag = max_imag


class DegenerateDirectionError(DicaError, ArithmeticError):
    code = "degenerate_direction_error"


class ParseError(InputError):
    code = "parse_error"

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row
