"""Closed-form Dirac-equation prediction for the wave-packet centre.

Pairing one A-guide and one B-guide per cell, the spinor

    psi_1(n) = (-1)^n a_{2n},   psi_2(n) = i (-1)^n a_{2n-1}

obeys i dpsi/dz = -i kappa alpha_1 dpsi/dxi + sigma(z) alpha_3 psi with xi = n = x/(2a),
i.e. kappa plays the speed of light and sigma the rest energy.  Treating the
Hamiltonians at different z as commuting, each k-component evolves as

    psi_k(t) = G(k) [cos A + i sinc(A) (-kappa k t + B),
                     cos A + i sinc(A) (-kappa k t - B)],
    B = -sigma_r t + i sigma_i (cos(omega t) - 1) / omega,
    A = sqrt(kappa^2 k^2 t^2 + B^2).

The position expectation 2 pi i \\int psi* d_k psi splits into a drift, a
trembling (ZB) and a purely imaginary part; all three and the norm are
evaluated here by Gauss-Legendre quadrature over the Gaussian spectrum.  The
time-ordering error of the commuting approximation is kept on purpose.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import QuadratureUnresolvedError
from .lattice_model import FieldState, LatticeConfig

# xi is measured in unit cells (2a); lattice centre of mass is in units of a.
XI_TO_LATTICE = 2.0

DEFAULT_NODES = 257
SPECTRAL_TAIL = 1e-8
QUADRATURE_RTOL = 1e-6
_SMALL_A = 1e-4
_SMALL_X = 1e-4


@dataclass(frozen=True)
class DiracParams:
    kappa: float
    sigma_r: float
    sigma_i_amp: float
    omega: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be > 0")
        if self.sigma_r < 0 or self.sigma_i_amp < 0 or self.omega < 0:
            raise ValueError("sigma_r, sigma_i_amp and omega must be >= 0")


ALPHA_1 = np.array([[0, 1], [1, 0]], dtype=complex)
ALPHA_2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
ALPHA_3 = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Quadrature over the angular spectrum G(k); 4 pi sum(w G^2) = 1."""

    k_nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    g_values: np.ndarray = field(repr=False)
    g_derivs: np.ndarray = field(repr=False)
    envelope_width: float = 1.0

    @property
    def size(self) -> int:
        return self.k_nodes.shape[0]

    def initial_norm(self) -> float:
        return float(4 * math.pi * np.sum(self.weights * self.g_values ** 2))

    def refined(self) -> "SpectralGrid":
        return spectral_grid(self.envelope_width, 2 * self.size + 1)


def spectral_grid(envelope_width: float, n_nodes: int = DEFAULT_NODES,
                  tail: float = SPECTRAL_TAIL) -> SpectralGrid:
    """Gauss-Legendre grid for an envelope exp(-xi^2 / (2 w^2)), ``w`` in unit cells.

    The spectrum is G(k) ~ exp(-k^2 w^2 / 2); the interval is cut where G falls to ``tail``.
    """
    if n_nodes < 3:
        raise ValueError("need at least 3 nodes")
    w = float(envelope_width)
    k_max = math.sqrt(2.0 * math.log(1.0 / tail)) / w
    x, wq = np.polynomial.legendre.leggauss(n_nodes)
    k = k_max * x
    weights = k_max * wq
    g = np.exp(-0.5 * (k * w) ** 2)
    g /= math.sqrt(4 * math.pi * np.sum(weights * g ** 2))
    dg = -k * w ** 2 * g
    return SpectralGrid(k, weights, g, dg, w)


def grid_for(config: LatticeConfig, n_nodes: int = DEFAULT_NODES) -> SpectralGrid:
    # Lattice envelope exp(-x^2/(2 s^2)) with x = 2 xi  ->  width s/2 in cells.
    return spectral_grid(config.spot_in_guides / 2.0, n_nodes)


def map_lattice_to_dirac(config: LatticeConfig) -> DiracParams:
    return DiracParams(config.kappa, config.sigma_r, config.sigma_i_amp, config.omega)


def spinor_from_field(state: FieldState):
    """Apply the cell substitution to a lattice state.

    Returns (psi_1, psi_2) over cells n = 0 .. N/2; guides outside the array count as zero.
    """
    a = state.amplitudes
    n_cells = a.shape[0] // 2 + 1
    n = np.arange(n_cells)
    sign = np.where(n % 2 == 0, 1.0, -1.0)
    even = 2 * n
    odd = 2 * n - 1
    a_even = np.where(even < a.shape[0], a[np.minimum(even, a.shape[0] - 1)], 0)
    a_odd = np.where(odd >= 0, a[np.maximum(odd, 0)], 0)
    a_odd = np.where(odd < a.shape[0], a_odd, 0)
    return sign * a_even, 1j * sign * a_odd


def _cos_ratio(x):
    """(cos x - 1)/x with its series near 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SMALL_X
    safe = np.where(small, 1.0, x)
    return np.where(small, -0.5 * x * (1 - x * x / 12.0), (np.cos(safe) - 1.0) / safe)


def mass_rate(params: DiracParams, t):
    """B(t)/t, finite at t = 0 and in the omega -> 0 limit."""
    t = np.asarray(t, dtype=float)
    return -params.sigma_r + 1j * params.sigma_i_amp * _cos_ratio(params.omega * t)


def mass_phase(params: DiracParams, t):
    """B(t) = -sigma_r t + i sigma_i (cos(omega t) - 1)/omega."""
    return np.asarray(t, dtype=float) * mass_rate(params, t)


def a_of_t(params: DiracParams, k, t):
    """A(t) on the principal branch."""
    k = np.asarray(k, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.sqrt((params.kappa * k * t) ** 2 + mass_phase(params, t) ** 2 + 0j)


def a_tracked(params: DiracParams, k: float, times) -> np.ndarray:
    """A along an increasing time path, with the sign chosen for continuity."""
    a = np.array(a_of_t(params, k, np.asarray(times, dtype=float)), dtype=complex)
    for i in range(1, a.shape[0]):
        if abs(-a[i] - a[i - 1]) < abs(a[i] - a[i - 1]):
            a[i] = -a[i]
    return a


def _cos_sinc(a_sq):
    """cos(A) and sin(A)/A from A^2 (both even in A, so no branch choice)."""
    a = np.sqrt(a_sq + 0j)
    small = np.abs(a) < _SMALL_A
    safe = np.where(small, 1.0, a)
    sinc = np.where(small, 1 - a_sq / 6.0 + a_sq ** 2 / 120.0, np.sin(safe) / safe)
    return np.cos(a), sinc


def spinor_evolution(params: DiracParams, grid: SpectralGrid, t: float) -> np.ndarray:
    """psi_k(t) for every node, shape (K, 2)."""
    k = grid.k_nodes
    p = params.kappa * k * t
    b = complex(mass_phase(params, t))
    c, s = _cos_sinc(p ** 2 + b ** 2)
    psi1 = c + 1j * s * (-p + b)
    psi2 = c + 1j * s * (-p - b)
    return grid.g_values[:, None] * np.stack([psi1, psi2], axis=1)


def zb_kernel(params: DiracParams, times) -> np.ndarray:
    """sin(A) cos*(A) at k = 0, with A followed continuously in t."""
    a = a_tracked(params, 0.0, times)
    return np.sin(a) * np.conj(np.cos(a))


@dataclass(frozen=True, eq=False)
class DiracPrediction:
    t: np.ndarray
    xi_drift: np.ndarray
    xi_zb: np.ndarray
    xi_im: np.ndarray
    psi_norm_sq: np.ndarray
    xi_expectation: np.ndarray
    zb_kernel: np.ndarray

    @property
    def lattice_center_of_mass(self) -> np.ndarray:
        """The prediction converted to guide units (comparable to the simulated centre of mass)."""
        return XI_TO_LATTICE * self.xi_expectation


def _integrals(params: DiracParams, grid: SpectralGrid, t: np.ndarray):
    k = grid.k_nodes[None, :]
    w = grid.weights[None, :]
    g2 = grid.g_values[None, :] ** 2
    ggp = (grid.g_values * grid.g_derivs)[None, :]
    kap = params.kappa
    tt = t[:, None]

    b_rate = mass_rate(params, tt)                    # B/t
    a2_rate = (kap * k) ** 2 + b_rate ** 2            # A^2/t^2
    c, s = _cos_sinc(a2_rate * tt ** 2)
    nz = a2_rate != 0
    a2_safe = np.where(nz, a2_rate, 1.0)
    drift_factor = np.where(nz, tt / a2_safe, 0.0)    # t^3 / A^2
    b_over_a_sq = np.where(nz, b_rate ** 2 / a2_safe, 1.0)   # B^2 / A^2

    abs_c2 = np.abs(c) ** 2
    abs_s2 = np.abs(s) ** 2
    drift = kap ** 3 * k ** 2 * (abs_c2 * drift_factor + abs_s2 * tt ** 3)
    xi_d = 4 * math.pi * np.sum(w * g2 * drift, axis=1)
    cs = s * np.conj(c)
    xi_zb = 4 * math.pi * np.sum(w * g2 * cs * kap * b_over_a_sq * tt, axis=1)
    xi_im = 8j * math.pi * np.sum(w * ggp * kap * k * cs.imag * tt, axis=1)
    cosfac = params.sigma_i_amp * tt * _cos_ratio(params.omega * tt)
    bracket = (kap * k * tt) ** 2 + (params.sigma_r * tt) ** 2 + cosfac ** 2
    norm = 4 * math.pi * np.sum(w * g2 * (abs_c2 + abs_s2 * bracket), axis=1)
    return xi_d, xi_zb, xi_im, norm


def _evaluate(params, grid, t, chunk):
    parts = [[], [], [], []]
    for start in range(0, t.shape[0], chunk):
        for acc, arr in zip(parts, _integrals(params, grid, t[start:start + chunk])):
            acc.append(arr)
    return [np.concatenate(p) for p in parts]


def _max_rel_change(a, b, scale):
    scale = max(scale, 1e-300)
    return float(np.max(np.abs(a - b))) / scale if a.size else 0.0


def prediction(params: DiracParams, grid: SpectralGrid, times, check: bool = True,
               rtol: float = QUADRATURE_RTOL, chunk: int = 256) -> DiracPrediction:
    """Evaluate the analytic series at ``times``.

    With ``check`` the evaluation is repeated on a grid with twice the nodes
    and QuadratureUnresolvedError is raised if anything moves by more than ``rtol``.
    """
    t = np.asarray(times, dtype=float)
    xi_d, xi_zb, xi_im, norm = _evaluate(params, grid, t, chunk)
    expectation = ((xi_d + xi_zb + xi_im) / norm).real
    if check:
        r_d, r_zb, r_im, r_norm = _evaluate(params, grid.refined(), t, chunk)
        r_exp = ((r_d + r_zb + r_im) / r_norm).real
        xi_scale = max(np.max(np.abs(v)) if v.size else 0.0 for v in (xi_d, xi_zb, xi_im))
        worst = max(
            _max_rel_change(xi_d, r_d, xi_scale),
            _max_rel_change(xi_zb, r_zb, xi_scale),
            _max_rel_change(xi_im, r_im, xi_scale),
            _max_rel_change(norm, r_norm, float(np.max(np.abs(norm))) if norm.size else 0.0),
            _max_rel_change(expectation, r_exp,
                            float(np.max(np.abs(expectation))) if expectation.size else 0.0),
        )
        if worst > rtol:
            raise QuadratureUnresolvedError(
                f"doubling the k-grid ({grid.size} nodes) changed the result by {worst:.2e} "
                f"relative (limit {rtol:g}); use more nodes")
    return DiracPrediction(t, xi_d, xi_zb, xi_im, norm, expectation, zb_kernel(params, t))
