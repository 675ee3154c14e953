"""Exception types raised across the package."""


class ZitterError(Exception):
    """Base class for all package errors."""


class ConfigError(ZitterError, ValueError):
    """A configuration or plan violates its invariants."""


class NonFiniteError(ZitterError, ArithmeticError):
    """Amplitudes became NaN/inf before the divergence cutoff fired.

    Almost always means the integrator step is too large.
    """

    def __init__(self, message, z=None):
        super().__init__(message)
        self.z = z


class SingularError(ZitterError, ArithmeticError):
    """Dense eigendecomposition failed or the eigenbasis is singular."""


class QuadratureUnresolvedError(ZitterError, ArithmeticError):
    """Doubling the k-space node count changed a reported value too much."""


class ZeroFieldError(ZitterError, ArithmeticError):
    """Total intensity underflowed, so intensity-weighted moments are undefined."""


class NoPeakError(ZitterError, ValueError):
    """No spectral line stands out of the noise floor."""


class ExpansionInvalidError(ZitterError, ValueError):
    """The small-imaginary-part dispersion expansion is outside its validity range."""


class TooCoarseError(ZitterError, ValueError):
    """A phase diagram cannot resolve its pseudo-PT boundary."""
