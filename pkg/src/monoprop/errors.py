"""Exception hierarchy shared by every module."""


class MonoPropError(Exception):
    """Base class for all library errors."""


# kitti_io
class MissingKey(MonoPropError, KeyError):
    pass


class MalformedNumber(MonoPropError, ValueError):
    pass


class MalformedLine(MonoPropError, ValueError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class UnsupportedFormat(MonoPropError, ValueError):
    pass


# camera
class BehindCamera(MonoPropError, ValueError):
    pass


class NonPositiveDepth(MonoPropError, ValueError):
    pass


class DegenerateBox(MonoPropError, ValueError):
    pass


# frames / instance data
class FrameMismatch(MonoPropError, ValueError):
    pass


class EmptyDepth(MonoPropError, ValueError):
    pass


class EmptyInstance(MonoPropError, ValueError):
    pass


# losses
class MaskMismatch(MonoPropError, ValueError):
    pass


class DimensionMismatch(MonoPropError, ValueError):
    pass


class PointBehindCamera(MonoPropError, ValueError):
    pass


class NonFiniteTerm(MonoPropError, ArithmeticError):
    pass


# refine
class DivergedNonFinite(MonoPropError, ArithmeticError):
    pass


# eval / synth
class EmptySet(MonoPropError, ValueError):
    pass


class PlacementFailure(MonoPropError, RuntimeError):
    pass
