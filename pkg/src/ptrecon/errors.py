"""Exception hierarchy shared by all modules."""


class ReconError(Exception):
    """Base class for all errors raised by ptrecon."""


class TreeSyntaxError(ReconError, ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class InvalidTreeError(ReconError, ValueError):
    pass


class LanguageTooLarge(ReconError):
    pass


class LogFormatError(ReconError, ValueError):
    pass


class EmptyLogError(ReconError, ValueError):
    pass


class NonFittingTraceError(ReconError, ValueError):
    def __init__(self, trace, position: int):
        shown = ",".join(trace)
        super().__init__(
            f"trace <{shown}> does not fit the tree; replay fails at position {position}"
        )
        self.trace = tuple(trace)
        self.position = position


class ConfigError(ReconError, ValueError):
    pass


class EMDCapExceeded(ReconError):
    pass
