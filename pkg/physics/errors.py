"""
Exception hierarchy for the lattice subradiance simulator.
The CLI maps each family onto a process exit code.
"""


class LatticeQEDError(Exception):
    """Base class for all simulator errors."""

    exit_code = 1


class UnsupportedConfigurationError(LatticeQEDError):
    """Geometry or orientation the requested operation cannot handle."""

    exit_code = 2


class LatticeDomainError(LatticeQEDError):
    """Input outside the mathematical domain of an operation."""

    exit_code = 2


class CapacityError(LatticeQEDError):
    """Layout request larger than the lattice can hold."""

    exit_code = 2


class NoContourError(LatticeQEDError):
    """Requested frequency has no iso-frequency contour in the band."""

    exit_code = 3


class DegenerateSourceError(LatticeQEDError):
    """Emitter decoupled from the resonant manifold (zero self rate)."""

    exit_code = 3


class StepSizeError(LatticeQEDError):
    """Integration drifted beyond tolerance; a smaller step is needed."""

    exit_code = 4
