"""Error types shared across the package.

Each error maps onto a CLI exit code: validation problems exit with 2,
numerical failures with 3 and I/O problems with 4.
"""


class SpectralLevyError(Exception):
    """Base class for all package errors."""

    exit_code = 1
    kind = "error"


class DomainError(SpectralLevyError, ValueError):
    """An argument lies outside the mathematical domain of a function."""

    exit_code = 2
    kind = "domain_error"


class InvariantError(SpectralLevyError, ValueError):
    """A parameter object violates one of its structural invariants."""

    exit_code = 2
    kind = "invariant_error"


class ConfigurationError(SpectralLevyError, ValueError):
    """A configuration document is malformed or inconsistent."""

    exit_code = 2
    kind = "configuration_error"


class NumericalError(SpectralLevyError, ArithmeticError):
    """A numerical routine failed to converge or became unstable."""

    exit_code = 3
    kind = "numerical_error"


class DataError(SpectralLevyError, IOError):
    """Input data could not be read or has the wrong shape."""

    exit_code = 4
    kind = "io_error"
