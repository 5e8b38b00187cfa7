"""Exception hierarchy shared by all iarc-kit modules."""


class IarcError(Exception):
    """Base class for all errors raised by iarc-kit."""


class ParseError(IarcError):
    """Malformed input file content (names the offending row/column)."""


class ConfigError(IarcError):
    """Invalid configuration: missing columns, unknown levels, bad options."""


class EmptyDatasetError(IarcError):
    """A dataset or selection contains zero data rows."""


class SpecValidationError(IarcError):
    """A spec object (scenario, prediction set, card input) violates its contract."""


class InfeasibleSplitError(IarcError):
    """The requested split cannot be constructed on this dataset."""


class EmptyScenarioError(IarcError):
    """A real-slice scenario selected no rows."""


class UndefinedStatisticError(IarcError):
    """A statistic is undefined, e.g. an empty sample after dropping missing values."""


class InsufficientCalibrationError(IarcError):
    """Too few calibration rows for post-hoc calibration."""


class SingularSystemError(IarcError):
    """The linear system is singular; regularization is required."""


class ComparisonError(IarcError):
    """Model-version comparison is impossible (no common scenarios)."""
