"""Two-band Bloch dispersion of the binary superlattice.

With a_{2n} ~ A exp(i q 2n a - i w z) and a_{2n+1} ~ B exp(i q (2n+1) a - i w z),
the amplitudes satisfy a 2x2 eigenproblem whose eigenvalues are

    w = +- sqrt(sigma^2 + 4 kappa^2 cos^2(q a)).

``q`` is taken in units of 1/a throughout, so ``q = pi/2`` is the zone edge.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ExpansionInvalidError


@dataclass(frozen=True)
class BlochPoint:
    q: float
    sigma: complex
    omega_pm: tuple

    def __post_init__(self):
        plus, minus = self.omega_pm
        if not np.isclose(plus, -minus, rtol=1e-12, atol=1e-300):
            raise ValueError("branches must be negatives of each other")


def _order(w):
    """Plus branch = positive real part; a tie is broken by positive imaginary part."""
    w = np.asarray(w, dtype=complex)
    flip = (w.real < 0) | ((w.real == 0) & (w.imag < 0))
    return np.where(flip, -w, w)


def dispersion_exact(kappa, sigma, q):
    """Both band frequencies (plus, minus) for complex ``sigma``; broadcasts over inputs."""
    c = np.cos(np.asarray(q, dtype=float))
    w = _order(np.sqrt(np.asarray(sigma, dtype=complex) ** 2 + 4.0 * kappa ** 2 * c ** 2))
    return w, -w


def dispersion_small_imag(kappa, sigma_r, sigma_i, q):
    """First-order expansion in sigma_i of :func:`dispersion_exact`.

    Raises ExpansionInvalidError where sigma_r^2 - sigma_i^2 + 4 kappa^2 cos^2 q <= 0.
    """
    sigma_r = np.asarray(sigma_r, dtype=float)
    sigma_i = np.asarray(sigma_i, dtype=float)
    d = sigma_r ** 2 - sigma_i ** 2 + 4.0 * kappa ** 2 * np.cos(np.asarray(q, dtype=float)) ** 2
    if np.any(d <= 0):
        raise ExpansionInvalidError("sigma_r^2 - sigma_i^2 + 4 kappa^2 cos^2(qa) must be positive")
    w = np.sqrt(d) * (1.0 + 1j * sigma_r * sigma_i / d)
    return w, -w


def real_part_small_imag(kappa, sigma_r, sigma_i, q):
    """Leading real part sqrt(sigma_r^2 - sigma_i^2 + 4 kappa^2 cos^2 q) of the plus branch."""
    return dispersion_small_imag(kappa, sigma_r, sigma_i, q)[0].real


def bloch_matrix(kappa, sigma, q):
    """The 2x2 matrix whose eigenvalues are the band frequencies."""
    c = 2.0 * kappa * np.cos(q)
    return np.array([[sigma, c], [c, -sigma]], dtype=complex)


def bloch_point(kappa, sigma, q) -> BlochPoint:
    plus, minus = dispersion_exact(kappa, sigma, q)
    return BlochPoint(float(q), complex(sigma), (complex(plus), complex(minus)))


def dispersion_table(kappa, sigma, q_values):
    """Rows (q, Re w+, Im w+, Re w-, Im w-) over a q grid."""
    q = np.asarray(q_values, dtype=float)
    plus, minus = dispersion_exact(kappa, sigma, q)
    return np.column_stack([q, plus.real, plus.imag, minus.real, minus.imag])
