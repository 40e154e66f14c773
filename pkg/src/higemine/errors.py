"""Exception types. Each maps onto one CLI exit code."""


class HigemineError(Exception):
    exit_code = 1


class ConfigError(HigemineError, ValueError):
    exit_code = 2


class DataError(HigemineError, ValueError):
    exit_code = 3


class MissingEmbeddingError(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class ShapeError(HigemineError, ValueError):
    exit_code = 4


class NumericError(HigemineError, ArithmeticError):
    exit_code = 4
