"""Exception types raised by the numerical layers."""


class PoleProximityError(ValueError):
    """An argument came within the guard distance of a pole."""


class SeriesConvergenceError(ArithmeticError):
    """A theta or lattice series would need more terms than the hard cap."""


class NumericalConditioningError(ArithmeticError):
    """An interpolation matrix is too ill-conditioned to invert reliably."""


class OverflowWindowError(OverflowError):
    """A growth factor leaves the representable double-precision window."""


class EnsembleDegradedError(RuntimeError):
    """Too many simulated paths had to be flagged as unreliable."""
