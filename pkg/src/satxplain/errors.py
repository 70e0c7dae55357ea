"""Exception hierarchy.

Each family maps to one CLI exit code (see ``satxplain.cli``).
"""


class SatxplainError(Exception):
    exit_code = 1


class ConfigError(SatxplainError):
    exit_code = 1


class InputError(SatxplainError):
    """I/O and file-format problems."""

    exit_code = 2


class ParseError(InputError):
    def __init__(self, message, line=None, column=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


class NonBinaryValue(ParseError):
    pass


class DimensionMismatch(ConfigError):
    pass


class ArityMismatch(ConfigError):
    pass


class InvalidThreshold(ConfigError):
    pass


class MissingAssignment(SatxplainError):
    pass


class EmptyData(ConfigError):
    pass


class EmptyNeighborhood(ConfigError):
    pass


class OracleError(SatxplainError):
    exit_code = 3


class OracleProtocolError(OracleError):
    pass


class OracleExit(OracleError):
    pass


class SolverError(SatxplainError):
    exit_code = 4


class Timeout(SolverError):
    pass


class HardUnsat(SolverError):
    pass


class NoOccurrence(SatxplainError):
    pass


class EmptyCover(SatxplainError):
    pass


class UnknownKey(ConfigError):
    pass
