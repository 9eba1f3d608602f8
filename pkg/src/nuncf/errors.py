"""Exception hierarchy shared across the package."""


class NuncfError(Exception):
    """Base class for every error raised by nuncf."""


# dataset
class SchemaError(NuncfError, ValueError):
    pass


class MissingColumn(NuncfError, KeyError):
    def __init__(self, column):
        super().__init__(column)
        self.column = column

    def __str__(self):
        return f"missing column {self.column!r}"


class _CellError(NuncfError, ValueError):
    def __init__(self, row, column, value):
        self.row, self.column, self.value = row, column, value
        super().__init__(f"row {row}, column {column!r}: {self._what} {value!r}")


class UnparsableValue(_CellError):
    _what = "cannot parse"


class UnknownCategory(_CellError):
    _what = "unknown category"


class EmptyFile(NuncfError, ValueError):
    pass


class TargetNotFound(NuncfError, KeyError):
    pass


class ClassTooSmall(NuncfError, ValueError):
    pass


# model
class SingleClassTraining(NuncfError, ValueError):
    pass


class EmptyTestSet(NuncfError, ValueError):
    pass


class LookupMiss(NuncfError, KeyError):
    pass


class ProtocolViolation(NuncfError, RuntimeError):
    pass


# relevance
class DegenerateRegression(NuncfError, ArithmeticError):
    pass


class EmptyBackground(NuncfError, ValueError):
    pass


class ClassAbsent(NuncfError, ValueError):
    pass


# neighbours / counterfactuals
class NoUnlikeNeighbour(NuncfError, LookupError):
    pass


class NoFlip(NuncfError, AssertionError):
    pass


class AlreadyDesiredClass(NuncfError, ValueError):
    pass


# metrics / text
class LengthMismatch(NuncfError, ValueError):
    pass


class BadTemplate(NuncfError, ValueError):
    pass
