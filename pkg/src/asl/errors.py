class ConfigError(ValueError):
    """Invalid class parameters, experiment configuration or CLI input.

    ``field`` carries a dotted path to the offending field when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class BudgetExhausted(RuntimeError):
    """Raised by the oracle when a query would push spent energy over the hard cap."""


class SparsityWarning(UserWarning):
    """A procedure was run outside the sparsity regime its guarantee assumes."""
