"""Exception types mapped onto CLI exit codes."""


class HourcastError(Exception):
    exit_code = 4


class ConfigError(HourcastError, ValueError):
    exit_code = 2


class DataError(HourcastError, ValueError):
    exit_code = 3


class StageError(HourcastError):
    """A pipeline stage failed; ``stage`` names it."""

    exit_code = 4

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
