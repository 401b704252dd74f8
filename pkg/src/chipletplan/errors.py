"""Exception hierarchy shared by every module."""


class ChipletPlanError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ChipletPlanError, ValueError):
    """Invalid parameters, geometry or stack definition."""


class StateError(ChipletPlanError, RuntimeError):
    """Operation called on a floorplan in the wrong lifecycle state."""


class ContractError(ChipletPlanError, ValueError):
    """A caller broke an operation's precondition (e.g. a masked action)."""


class NumericalError(ChipletPlanError, ArithmeticError):
    """Iterative solve or optimisation produced unusable numbers."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InstanceError(ChipletPlanError):
    """The problem instance admits no legal floorplan under the sampler."""


class SpecParseError(ConfigurationError):
    """Spec document rejected; ``code`` identifies the failure class."""

    MISSING_KEY = "E_MISSING_KEY"
    NOT_FINITE = "E_NOT_FINITE"
    UNKNOWN_ENDPOINT = "E_UNKNOWN_ENDPOINT"
    CHIPLET_TOO_LARGE = "E_CHIPLET_TOO_LARGE"
    INVALID_VALUE = "E_INVALID_VALUE"
    SYNTAX = "E_SYNTAX"

    def __init__(self, code, key, message):
        super().__init__(f"[{code}] {key}: {message}")
        self.code = code
        self.key = key


class TableFormatError(ChipletPlanError):
    """Base class for resistance-table / checkpoint file problems."""


class VersionMismatchError(TableFormatError):
    pass


class TruncatedFileError(TableFormatError):
    pass


class ParameterMismatchError(TableFormatError):
    pass
