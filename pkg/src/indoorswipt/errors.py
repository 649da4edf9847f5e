"""Exception types raised by the numerical kernels."""


class RangeError(ArithmeticError):
    """An intermediate or final value left the representable float range."""


class BranchCutError(ValueError):
    """A multivalued function was evaluated exactly on its branch cut."""


class TruncationError(ArithmeticError):
    """A series did not reach its tolerance within the allowed number of terms."""


class QuadratureError(ArithmeticError):
    """A numerical integral failed to converge.

    Attributes
    ----------
    dimension : str
        Name of the integration variable that failed (``"omega"``, ``"y"``, ...).
    panels : int
        Number of panels used when giving up.
    residual : float
        Last error estimate.
    """

    def __init__(self, message, dimension="", panels=0, residual=float("nan")):
        super().__init__(message)
        self.dimension = dimension
        self.panels = panels
        self.residual = residual


class InversionError(QuadratureError):
    """Characteristic-function inversion did not converge (non-decaying tail)."""


class InsufficientSamplesError(ValueError):
    """A Monte Carlo estimator was asked to work with too few samples."""


class ConfigError(ValueError):
    """Invalid run configuration."""
