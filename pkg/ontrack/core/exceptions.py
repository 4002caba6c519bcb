"""Exception hierarchy shared by the numeric core and the services."""


class OntrackError(Exception):
    """Base class for all package errors."""


class ShapeError(OntrackError, ValueError):
    """Channel, kernel or array shape mismatch."""


class GeometryError(OntrackError, ValueError):
    """Degenerate box, position outside a grid, or box outside a frame."""


class ConvergedError(OntrackError):
    """Zero gradient: the optimizer has reached a stationary point."""


class SingularSystemError(OntrackError):
    """The dense normal equations have no unique solution."""


class TrackerStateError(OntrackError, RuntimeError):
    """Tracker used before initialization."""


class DatasetError(OntrackError):
    """Malformed dataset, results or config file."""
