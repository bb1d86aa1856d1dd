"""Exception hierarchy shared by the library and the CLI."""


class ShieldError(Exception):
    """Base class for all errors raised by lowrank_shield."""

    exit_code = 1


class DomainError(ShieldError, ValueError):
    """An argument is outside the domain of the operation."""

    exit_code = 2


class UsageError(DomainError):
    """Malformed user input such as a bad config string or CLI flag."""

    exit_code = 2


class DataError(ShieldError, ValueError):
    """Corrupt or inconsistent on-disk data (images, manifests, model files)."""

    exit_code = 3

    def __init__(self, message, path=None, offset=None):
        self.path = path
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"byte {offset}")
        if where:
            message = f"{': '.join(where)}: {message}"
        super().__init__(message)


class NumericalError(ShieldError, ArithmeticError):
    """An iterative numerical routine failed to converge or produced non-finite values."""

    exit_code = 4

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)
