"""Exception types raised across the package."""


class LSAMPError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(LSAMPError, ValueError):
    pass


class DegenerateSignalError(LSAMPError, ValueError):
    pass


class IngestionError(LSAMPError, ValueError):
    pass


class FormatError(LSAMPError, ValueError):
    """Malformed LST1 file. ``offset`` is the byte position of the fault."""

    def __init__(self, message, offset=0, path=None):
        where = f"{path}: " if path else ""
        super().__init__(f"{where}{message} (offset {offset})")
        self.offset = offset
        self.path = path


class SolverDivergedError(LSAMPError, RuntimeError):
    """A message-passing recursion produced non-finite state.

    Attributes
    ----------
    iteration : int
        Inner iteration at which the state stopped being finite.
    phase : str or None
        ``"gamp"`` or ``"bigamp"`` when raised from the turbo loop.
    outer_iteration : int or None
    partial : object or None
        Last finite estimate, for diagnostics.
    """

    def __init__(self, message, iteration=None, phase=None,
                 outer_iteration=None, partial=None):
        super().__init__(message)
        self.iteration = iteration
        self.phase = phase
        self.outer_iteration = outer_iteration
        self.partial = partial
