"""Exception hierarchy shared by all modules."""


class SlotQEDError(Exception):
    pass


class DomainError(SlotQEDError, ValueError):
    """Argument outside the mathematical or physical domain of an operation."""


class SingularInputError(DomainError):
    pass


class IntegratorError(SlotQEDError, RuntimeError):
    pass


class ConfigError(SlotQEDError, ValueError):
    pass


class ParseError(SlotQEDError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FitError(SlotQEDError, RuntimeError):
    pass


class SteadyStateError(SlotQEDError, RuntimeError):
    pass
