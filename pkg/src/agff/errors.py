"""Exception types shared across the toolkit.

DataError subclasses map to CLI exit code 2, NumericalError to exit 3.
"""


class AgffError(Exception):
    pass


class DataError(AgffError):
    """Anything wrong with input data, file formats, or artifacts."""


class IoError(DataError):
    pass


class RowFormatError(DataError):
    def __init__(self, message: str, row: int):
        super().__init__(f"row {row}: {message}")
        self.row = row


class FormatError(DataError):
    pass


class VersionError(DataError):
    pass


class StratifyError(DataError):
    pass


class BuildError(DataError):
    pass


class ModeError(DataError):
    pass


class ShapeError(AgffError):
    pass


class ContractError(AgffError):
    pass


class EmptyDocumentError(AgffError):
    pass


class TrainError(AgffError):
    pass


class NumericalError(AgffError):
    """A tensor operation produced NaN/Inf, or training lost numerical footing."""
