"""Exception hierarchy shared across the simulator.

The CLI maps each family onto an exit status, so raise the narrowest one.
"""


class FedSimError(Exception):
    """Base class for all simulator errors."""

    exit_code = 1


class ConfigError(FedSimError, ValueError):
    """Bad configuration value, missing key or invalid command usage."""

    exit_code = 1


class ValidationError(FedSimError, ValueError):
    """Input data violates a structural invariant.

    Parameters
    ----------
    field : str
        Name of the offending field (``"edges"``, ``"masks"``, ...).
    message : str
        Human-readable description.
    """

    exit_code = 2

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DegenerateInputError(FedSimError, ValueError):
    """A quantity is undefined for the given input (e.g. zero denominator)."""

    exit_code = 2


class NumericalError(FedSimError, ArithmeticError):
    """An iterative routine failed to converge or produced non-finite values."""

    exit_code = 3
