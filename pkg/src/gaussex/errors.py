"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: usage errors -> 2, model/domain errors -> 3,
numeric failures -> 4.
"""


class GaussexError(Exception):
    exit_code = 1


class UsageError(GaussexError, ValueError):
    """Caller asked for something the API does not support with these arguments."""

    exit_code = 2


class ConfigError(UsageError):
    """Experiment config could not be parsed or violates the strict schema."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class DomainError(GaussexError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 3


class ModelError(GaussexError, ValueError):
    """Model specification is internally inconsistent."""

    exit_code = 3


class NotPositiveDefinite(GaussexError, ArithmeticError):
    """Cholesky failed even at the largest jitter of the escalation schedule."""

    exit_code = 4

    def __init__(self, pivot, jitter):
        self.pivot = pivot
        self.jitter = jitter
        super().__init__(
            f"covariance matrix not positive definite: pivot {pivot} failed at jitter {jitter:.3g}"
        )
