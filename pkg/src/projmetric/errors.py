"""Exception hierarchy shared by all modules."""


class ProjmetricError(Exception):
    """Base class for every error raised by this package."""


class ParseError(ProjmetricError, ValueError):
    """Syntax error in expression or spec-file text.

    ``offset`` is the byte offset into the parsed text where the problem was
    detected; ``line`` is set by file loaders.
    """

    def __init__(self, message, offset=None, line=None):
        self.offset = offset
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")
        self.message = message


class UnknownFunctionError(ParseError):
    pass


class DomainError(ProjmetricError, ArithmeticError):
    """An expression was evaluated outside its real domain."""

    def __init__(self, message, point=None):
        self.point = point
        if point is not None:
            message = f"{message} at (x, y) = ({point[0]:.17g}, {point[1]:.17g})"
        super().__init__(message)


class UnboundParameterError(ProjmetricError, KeyError):
    def __init__(self, name):
        self.name = name
        super().__init__(name)

    def __str__(self):
        return f"unbound parameter {self.name!r}"


class DegenerateMetricError(ProjmetricError, ValueError):
    pass


class InvalidParameterError(ProjmetricError, ValueError):
    pass


class PreconditionError(ProjmetricError, ValueError):
    pass


class IndeterminateError(ProjmetricError, RuntimeError):
    """A numeric decision (rank, isometry match) could not be made safely."""


class IntegrationError(ProjmetricError, RuntimeError):
    pass
