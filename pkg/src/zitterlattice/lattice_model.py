"""Binary waveguide superlattice with z-periodic gain/loss.

Guide ``n`` obeys

    i da_n/dz = -kappa (a_{n+1} + a_{n-1}) + (-1)^n sigma(z) a_n,
    sigma(z)  = sigma_r + i r sigma_r sin(omega z),

with open boundaries.  Index 0 is an A-guide (carries ``+sigma``).

Units: rates (kappa, sigma_r, omega, omega0) share one unit and z is measured
in its inverse.  The defaults use kappa = 1, i.e. everything is expressed in
units of the coupling constant.  Transverse lengths (spacing, spot size,
wavelength) are in micrometres and enter only through their ratios.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .errors import ConfigError

EDGE_TAIL_LIMIT = 1e-6


@dataclass(frozen=True)
class LatticeConfig:
    n_guides: int = 200
    spacing_a: float = 16.0
    kappa: float = 1.0
    sigma_r: float = 2.1
    gain_ratio_r: float = 0.0
    omega: float = 0.0
    omega0: Optional[float] = None
    wavelength: float = 0.633
    n_substrate: float = 1.5
    spot_size: float = 105.0

    def __post_init__(self):
        if self.omega0 is None:
            object.__setattr__(self, "omega0", float(self.kappa))
        if isinstance(self.n_guides, bool) or int(self.n_guides) != self.n_guides:
            raise ConfigError(f"n_guides must be an integer, got {self.n_guides!r}")
        object.__setattr__(self, "n_guides", int(self.n_guides))
        for f in fields(self):
            if f.name != "n_guides":
                v = getattr(self, f.name)
                if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                    raise ConfigError(f"{f.name} must be a finite number, got {v!r}")
                object.__setattr__(self, f.name, float(v))
        if self.n_guides < 4 or self.n_guides % 2:
            raise ConfigError(f"n_guides must be even and >= 4, got {self.n_guides}")
        if self.kappa <= 0:
            raise ConfigError("kappa must be > 0")
        if self.sigma_r < 0 or self.gain_ratio_r < 0 or self.omega < 0:
            raise ConfigError("sigma_r, gain_ratio_r and omega must be >= 0")
        if self.omega0 <= 0:
            raise ConfigError("omega0 must be > 0")
        if self.spacing_a <= 0 or self.wavelength <= 0 or self.n_substrate <= 0:
            raise ConfigError("spacing_a, wavelength and n_substrate must be > 0")
        if self.spot_size <= self.spacing_a:
            raise ConfigError("spot_size must exceed spacing_a so the envelope covers several guides")

    @classmethod
    def from_ratios(cls, sigma_over_kappa=2.1, r=0.0, omega_over_omega0=0.0, **kw):
        """Build a config from the dimensionless axes used in the phase diagrams."""
        kappa = float(kw.pop("kappa", 1.0))
        omega0 = kw.pop("omega0", None)
        omega0 = kappa if omega0 is None else float(omega0)
        return cls(kappa=kappa, omega0=omega0, sigma_r=sigma_over_kappa * kappa,
                   gain_ratio_r=r, omega=omega_over_omega0 * omega0, **kw)

    def with_(self, **changes) -> "LatticeConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "LatticeConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown lattice keys: {sorted(unknown)}")
        return cls(**data)

    @property
    def sigma_i_amp(self) -> float:
        return self.gain_ratio_r * self.sigma_r

    @property
    def bragg_angle(self) -> float:
        """Incidence angle (rad) that puts the beam at the zone edge q = pi/(2a)."""
        return self.wavelength / (4.0 * self.n_substrate * self.spacing_a)

    @property
    def spot_in_guides(self) -> float:
        return self.spot_size / self.spacing_a

    @property
    def positions(self) -> np.ndarray:
        """Guide positions in units of a, measured from the array centre (guide N/2)."""
        return np.arange(self.n_guides, dtype=float) - self.n_guides // 2

    @property
    def parity(self) -> np.ndarray:
        """(-1)^n for every guide index."""
        p = np.ones(self.n_guides)
        p[1::2] = -1.0
        return p


@dataclass(frozen=True, eq=False)
class FieldState:
    """Complex guide amplitudes at propagation distance ``z``."""

    z: float
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        if a.ndim != 1:
            raise ValueError("amplitudes must be one-dimensional")
        if not np.all(np.isfinite(a)):
            raise ValueError("amplitudes must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "z", float(self.z))

    @property
    def intensity(self) -> np.ndarray:
        return self.amplitudes.real ** 2 + self.amplitudes.imag ** 2

    @property
    def total_intensity(self) -> float:
        return float(np.sum(self.intensity))

    def check_against(self, config: LatticeConfig) -> None:
        if self.amplitudes.shape[0] != config.n_guides:
            raise ConfigError(
                f"state has {self.amplitudes.shape[0]} guides, config expects {config.n_guides}")


def sigma_at(config: LatticeConfig, z):
    """Complex propagation mismatch sigma_r + i r sigma_r sin(omega z)."""
    return config.sigma_r + 1j * config.sigma_i_amp * np.sin(config.omega * np.asarray(z, dtype=float))


def apply_lattice_operator(a, sigma, kappa, parity):
    """Return da/dz for one state (shape (N,)) or a batch (shape (B, N)).

    ``sigma`` is a scalar or has shape (B,).  Neighbours outside the array are zero.
    """
    sig = np.asarray(sigma)
    if sig.ndim:
        sig = sig[:, None]
    out = (-1j * sig) * parity * a
    out[..., 1:] += (1j * kappa) * a[..., :-1]
    out[..., :-1] += (1j * kappa) * a[..., 1:]
    return out


def coupled_mode_rhs(config: LatticeConfig, state: FieldState) -> np.ndarray:
    state.check_against(config)
    return apply_lattice_operator(state.amplitudes, sigma_at(config, state.z),
                                  config.kappa, config.parity)


def tight_binding_hamiltonian(n_guides: int, kappa: float, sigma: complex) -> np.ndarray:
    """Dense H with H[n, n+-1] = -kappa and H[n, n] = (-1)^n sigma; da/dz = -i H a."""
    h = np.zeros((n_guides, n_guides), dtype=complex)
    idx = np.arange(n_guides)
    h[idx, idx] = np.where(idx % 2 == 0, 1.0, -1.0) * sigma
    h[idx[:-1], idx[:-1] + 1] = -kappa
    h[idx[:-1] + 1, idx[:-1]] = -kappa
    return h


def hamiltonian(config: LatticeConfig, z: float = 0.0) -> np.ndarray:
    return tight_binding_hamiltonian(config.n_guides, config.kappa, complex(sigma_at(config, z)))


def gaussian_envelope(config: LatticeConfig, x=None) -> np.ndarray:
    """Envelope G(x) with peak 1; spot_size is the 1/e half-width of |G|^2."""
    x = config.positions if x is None else np.asarray(x, dtype=float)
    w = config.spot_in_guides
    return np.exp(-x ** 2 / (2.0 * w ** 2))


def initial_gaussian_field(config: LatticeConfig) -> FieldState:
    """Gaussian beam launched at the Bragg angle, centred on guide N/2.

    The tilt exp(2 pi i x n_s theta_B / lambda) advances the phase by pi/2 per
    guide, placing the beam at the Brillouin-zone edge.
    """
    x = config.positions
    w = config.spot_in_guides
    edge = max(abs(x[0]), abs(x[-1]))
    tail = math.exp(-edge ** 2 / (2.0 * w ** 2))
    if tail > EDGE_TAIL_LIMIT:
        raise ConfigError(
            f"envelope tail at the array edge is {tail:.3g} of the peak "
            f"(limit {EDGE_TAIL_LIMIT:g}); use more guides or a narrower beam")
    x_phys = x * config.spacing_a
    k_t = 2.0 * math.pi * config.n_substrate * config.bragg_angle / config.wavelength
    return FieldState(0.0, gaussian_envelope(config, x) * np.exp(1j * k_t * x_phys))
