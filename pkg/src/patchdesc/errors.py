"""Exception hierarchy. Each class carries the process exit code the CLI uses."""


class PatchDescError(Exception):
    exit_code = 2


class UsageError(PatchDescError):
    exit_code = 1


class DataError(PatchDescError):
    exit_code = 2


class NumericError(PatchDescError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class EmptyDescription(DataError):
    pass


class EmptyInput(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class DegenerateSplit(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class SequenceTooLong(DataError):
    pass


class GroupOutOfRange(DataError):
    pass


class ChecksumMismatch(DataError):
    pass


class VersionMismatch(DataError):
    pass


class StaleStage(DataError):
    pass


class NonFiniteLoss(NumericError):
    pass
