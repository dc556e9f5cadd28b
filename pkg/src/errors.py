# src/errors.py
# Every error raised on purpose by this package derives from TadSieError.


class TadSieError(Exception):
    pass


class InsufficientDataError(TadSieError, ValueError):
    pass


class InsufficientDonorsError(InsufficientDataError):
    pass


class DomainError(TadSieError, ValueError):
    pass


class ConfigError(TadSieError, ValueError):
    pass


class DatasetParseError(TadSieError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RecruitmentError(TadSieError, RuntimeError):
    pass


class DegenerateStatisticError(TadSieError, ArithmeticError):
    pass


class TrialError(TadSieError, RuntimeError):
    def __init__(self, trial_index, cause):
        self.trial_index = trial_index
        self.cause = cause
        super().__init__(f"trial {trial_index} failed: {cause}")
