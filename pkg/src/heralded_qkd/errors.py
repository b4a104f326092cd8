"""Exception types raised across the package."""


class QKDModelError(Exception):
    """Base class for all errors raised by heralded_qkd."""


class InvalidM(QKDModelError, ValueError):
    """Number of HS units not allowed for the chosen architecture."""


class InvalidRange(QKDModelError, ValueError):
    """A physical parameter lies outside its admissible range."""


class UnsupportedSource(QKDModelError, ValueError):
    """Operation requested for a source kind that does not support it."""


class DegenerateBranch(QKDModelError, ArithmeticError):
    """Conditioning on a heralding outcome of (numerically) zero probability."""


class NegativeLoss(QKDModelError, ValueError):
    pass


class ZeroYield(QKDModelError, ArithmeticError):
    pass


class OutOfDomain(QKDModelError, ValueError):
    pass


class DegenerateStatistics(QKDModelError, ArithmeticError):
    """Click and no-click statistics are too similar to separate yields."""


class DegenerateBounds(QKDModelError, ArithmeticError):
    """Single-photon yield lower bound is zero, so e1 cannot be bounded."""


class InvalidTrials(QKDModelError, ValueError):
    pass


class ConfigError(QKDModelError, ValueError):
    """Configuration file could not be parsed or describes an invalid run."""


class GridMismatch(QKDModelError, ValueError):
    pass
