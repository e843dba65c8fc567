"""Exception hierarchy shared by every layer.

The class name doubles as the machine-readable error code: the CLI prints
``type(exc).__name__`` on stderr and gateway rejections carry the same name.
"""


class RailmonError(Exception):
    """Base class for all domain errors (CLI exit code 1)."""


class FrameError(RailmonError):
    pass


class BadHeader(FrameError):
    pass


class BadLength(FrameError):
    pass


class InvalidNodeId(FrameError):
    pass


class RangeError(RailmonError, ValueError):
    """A value lies outside a sensor's or a field's representable range."""


class ParamError(RailmonError, ValueError):
    """Radio parameter outside its domain."""


class DegenerateParams(ParamError):
    pass


class DomainError(RailmonError, ValueError):
    pass


class UnknownRegister(RailmonError):
    pass


class NotMeasuring(RailmonError):
    pass


class ClockRegression(RailmonError):
    pass


class SinkUnavailable(RailmonError):
    pass


class ScenarioInvalid(RailmonError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class StoreUnavailable(RailmonError):
    pass


class BadRange(RailmonError):
    pass
