"""Exception hierarchy shared by every module of the package."""


class FSRError(Exception):
    """Base class for all errors raised by :mod:`fsr`."""


class InvalidParameterError(FSRError, ValueError):
    pass


class StencilTooSmallError(InvalidParameterError):
    pass


class DegenerateStencilError(FSRError):
    """Least-squares normal matrix is singular at some node."""

    def __init__(self, node: int, message: str | None = None):
        self.node = node
        super().__init__(message or f"degenerate least-squares stencil at node {node}")


class InadmissibleStateError(FSRError):
    """Non-positive density or pressure (or a reconstructed state that is)."""

    def __init__(self, message: str, *, edge: int | None = None, node: int | None = None):
        self.edge = edge
        self.node = node
        super().__init__(message)


class RoeFailureError(InadmissibleStateError):
    pass


class SolverDivergenceError(FSRError):
    """The iteration produced an inadmissible or non-finite state.

    ``snapshot`` holds the last admissible conservative iterate and ``step``
    the iteration (or time-step) index at which the failure occurred.
    """

    def __init__(self, message: str, *, step: int, snapshot=None):
        self.step = step
        self.snapshot = snapshot
        super().__init__(message)


class IterationFailureError(FSRError):
    pass


class InvalidSeriesError(FSRError, ValueError):
    pass


class ConfigError(FSRError, ValueError):
    pass
