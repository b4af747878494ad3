"""Exception hierarchy shared across the package."""


class SmspkError(Exception):
    """Base class for all package errors."""


class DataError(SmspkError, ValueError):
    """Input data is malformed or inconsistent."""


class PathwayParseError(DataError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class EmptyPathwayError(DataError):
    """Raised when a pathway has no genes left after preprocessing."""


class CohortError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class NonConvergenceError(SmspkError, RuntimeError):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"propagation did not converge after {iterations} iterations "
            f"(last residual {residual:.3e})"
        )


class ConfigError(SmspkError, ValueError):
    """Invalid parameter or configuration value."""


class LogRankError(DataError):
    """The log-rank test is undefined for the given groups."""


class NoPathwayPassedError(SmspkError):
    def __init__(self, report):
        self.report = report
        super().__init__("no pathway passed screen")
