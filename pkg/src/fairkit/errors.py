"""Exception types raised across the toolkit."""


class FairkitError(Exception):
    """Base class for all toolkit errors."""


class DataError(FairkitError):
    """Input data does not satisfy the declared schema or a precondition."""


class MissingColumn(DataError):
    def __init__(self, name):
        super().__init__(f"missing column: {name!r}")
        self.name = name


class DuplicateColumn(DataError):
    def __init__(self, name):
        super().__init__(f"duplicate column: {name!r}")
        self.name = name


class BadValue(DataError):
    def __init__(self, column, row, value, reason=""):
        msg = f"bad value {value!r} in column {column!r} at row {row}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)
        self.column = column
        self.row = row
        self.value = value


class EmptyFile(DataError):
    pass


class SchemaError(DataError):
    pass


class CannotDropOutcome(DataError):
    pass


class InfeasibleSplit(DataError):
    pass


class DegenerateLabels(DataError):
    pass


class FeatureMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class UndefinedRate(FairkitError):
    pass


class NoPositivesInGroup(FairkitError):
    def __init__(self, group):
        super().__init__(f"group {group!r} has no positive samples")
        self.group = group


class InsufficientFolds(FairkitError):
    pass


class EmptyCell(FairkitError):
    def __init__(self, group, label):
        super().__init__(f"no samples with group={group!r} and label={label}")
        self.group = group
        self.label = label


class BadLambda(FairkitError):
    pass


class EmptyGrid(FairkitError):
    pass


class SpecInvalid(FairkitError):
    pass


class IncompleteReport(FairkitError):
    pass


class ConfigError(FairkitError):
    pass


class DidNotConverge(UserWarning):
    """Optimizer stopped at max_iterations above tolerance."""


class UnknownGroup(UserWarning):
    """A group level absent at fit time was seen at prediction time."""
