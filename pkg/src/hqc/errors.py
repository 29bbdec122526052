"""Exception types shared across the package."""


class HqcError(Exception):
    """Base class for all package-specific errors."""


class ModelFormatError(HqcError):
    """Malformed model or loop description."""


class HermiticityError(ModelFormatError):
    """A matrix that must be Hermitian is not."""


class ParameterCountError(HqcError):
    """Parameter vector length does not match the model."""


class OpenLoopError(HqcError):
    """Explicit loop samples do not close."""


class LevelCrossingError(HqcError):
    """Energy levels touch or merge somewhere along the loop."""


class ChartInvalidError(HqcError):
    """No usable chart: the requested minor is numerically singular."""


class ChartBoundaryError(HqcError):
    """A finite-difference stencil straddles a chart boundary."""


class NonUnitaryError(HqcError):
    """A matrix that must be unitary (or special unitary) is not."""


class BasePointMismatchError(HqcError):
    """Holonomies composed at different base points, levels or frames."""


class OverlapRankError(HqcError):
    """Consecutive frame overlap lost rank: loop sampling too coarse."""


class SectorTooLargeError(HqcError):
    """Requested bosonic sector exceeds the dense-matrix size cap."""
