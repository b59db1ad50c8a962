"""Exception types raised by meshtucker."""


class MeshTuckerError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(MeshTuckerError, ValueError):
    def __init__(self, message, expected=None, actual=None):
        if expected is not None or actual is not None:
            message = f"{message} (expected {expected}, got {actual})"
        super().__init__(message)
        self.expected = expected
        self.actual = actual


class InvalidModeError(MeshTuckerError, ValueError):
    pass


class RankError(MeshTuckerError, ValueError):
    pass


class DecompositionError(MeshTuckerError, RuntimeError):
    pass


class SingularTransformError(MeshTuckerError, ValueError):
    def __init__(self, frame, message=None):
        super().__init__(message or f"transform for frame {frame} has a singular linear block")
        self.frame = frame


class UnreachableRateError(MeshTuckerError, ValueError):
    """No (v, f) pair reaches the requested compression ratio within tolerance."""


class ContainerFormatError(MeshTuckerError, ValueError):
    pass


class TopologyMismatchError(MeshTuckerError, ValueError):
    pass


class AssetParseError(MeshTuckerError, ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line
