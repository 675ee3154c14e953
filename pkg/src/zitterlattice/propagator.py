"""Fixed-step RK4 integration of the coupled-mode equations, plus an exact oracle."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import ConfigError, NonFiniteError, SingularError
from .lattice_model import (
    FieldState,
    LatticeConfig,
    apply_lattice_operator,
    tight_binding_hamiltonian,
)

DEFAULT_STEP = 0.005
DEFAULT_Z_MAX = 120.0
DEFAULT_CUTOFF = 1e9
EXACT_MAX_GUIDES = 512


class Termination(str, enum.Enum):
    COMPLETED = "COMPLETED"
    DIVERGED = "DIVERGED"


@dataclass(frozen=True)
class PropagationPlan:
    """Integration window and sampling.

    ``step=None`` resolves to min(DEFAULT_STEP, modulation period / 40) once the
    lattice config is known.  Lengths are in units of 1/kappa when kappa = 1.
    """

    z_max: float = DEFAULT_Z_MAX
    step: Optional[float] = None
    sample_every: int = 1
    divergence_cutoff: float = DEFAULT_CUTOFF

    def __post_init__(self):
        for name in ("z_max", "step", "sample_every", "divergence_cutoff"):
            v = getattr(self, name)
            if v is None and name == "step":
                continue
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{name} must be a number, got {v!r}")
            if name != "sample_every":
                object.__setattr__(self, name, float(v))
        if not (self.z_max > 0 and math.isfinite(self.z_max)):
            raise ConfigError("z_max must be positive and finite")
        if self.step is not None and not (0 < self.step <= self.z_max):
            raise ConfigError("step must satisfy 0 < step <= z_max")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ConfigError("sample_every must be an integer >= 1")
        object.__setattr__(self, "sample_every", int(self.sample_every))
        if not self.divergence_cutoff > 1:
            raise ConfigError("divergence_cutoff must exceed 1")

    def resolved(self, config: LatticeConfig) -> "PropagationPlan":
        plan = self
        if plan.step is None:
            step = DEFAULT_STEP
            if config.omega > 0:
                step = min(step, 2 * math.pi / config.omega / 40)
            plan = replace(plan, step=min(step, plan.z_max))
        plan.validate(config)
        return plan

    def validate(self, config: LatticeConfig) -> None:
        if self.step is None:
            raise ConfigError("plan step is unresolved")
        if config.omega > 0 and self.step > 2 * math.pi / config.omega / 20 * (1 + 1e-12):
            raise ConfigError(
                f"step {self.step:g} does not resolve the modulation period "
                f"{2 * math.pi / config.omega:g} (need step <= period/20)")

    def n_steps(self) -> int:
        return max(1, math.ceil(self.z_max / self.step - 1e-9))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "PropagationPlan":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown plan keys: {sorted(unknown)}")
        return cls(**data)


class Propagation(NamedTuple):
    state: FieldState
    termination: Termination
    max_intensity_ratio: float


def _rk4_step(a, z, h, rhs):
    # overflow is detected by the callers, so numpy need not warn about it
    with np.errstate(over="ignore", invalid="ignore"):
        return _rk4(a, z, h, rhs)


def _rk4(a, z, h, rhs):
    k1 = rhs(a, z)
    k2 = rhs(a + (0.5 * h) * k1, z + 0.5 * h)
    k3 = rhs(a + (0.5 * h) * k2, z + 0.5 * h)
    k4 = rhs(a + h * k3, z + h)
    return a + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(rhs: Callable, a0: np.ndarray, z0: float, length: float, n_steps: int) -> np.ndarray:
    """Plain fixed-step RK4 for da/dz = rhs(a, z); the kernel behind :func:`propagate`."""
    h = length / n_steps
    a = np.array(a0, dtype=complex)
    for i in range(n_steps):
        a = _rk4_step(a, z0 + i * h, h, rhs)
    return a


def propagate(config: LatticeConfig, plan: PropagationPlan, initial: FieldState,
              observer: Optional[Callable[[FieldState], None]] = None,
              reference_intensity: Optional[float] = None) -> Propagation:
    """Integrate from ``initial.z`` to ``initial.z + plan.z_max``.

    The observer sees the initial state, every ``sample_every``-th step and the
    terminal state.  Divergence is tested every step against
    ``reference_intensity`` (default: the initial total intensity).
    """
    plan = plan.resolved(config)
    initial.check_against(config)
    e0 = initial.total_intensity if reference_intensity is None else float(reference_intensity)
    if not e0 > 0:
        raise ConfigError("reference intensity must be positive")

    n = plan.n_steps()
    h = plan.z_max / n
    z0 = initial.z
    kappa, parity = config.kappa, config.parity
    sr, si, om = config.sigma_r, config.sigma_i_amp, config.omega

    def rhs(a, z):
        return apply_lattice_operator(a, sr + 1j * si * math.sin(om * z), kappa, parity)

    a = np.array(initial.amplitudes)
    if observer is not None:
        observer(initial)
    max_ratio = 1.0 if reference_intensity is None else initial.total_intensity / e0
    termination = Termination.COMPLETED
    for i in range(n):
        z = z0 + i * h
        a = _rk4_step(a, z, h, rhs)
        with np.errstate(over="ignore", invalid="ignore"):
            ratio = float(np.sum(a.real ** 2 + a.imag ** 2)) / e0
        if not math.isfinite(ratio):
            raise NonFiniteError(
                f"amplitudes became non-finite at z={z + h:.6g}; reduce the step", z=z + h)
        max_ratio = max(max_ratio, ratio)
        last = i == n - 1
        if ratio > plan.divergence_cutoff:
            termination = Termination.DIVERGED
            last = True
        zf = z0 + plan.z_max if i == n - 1 else z0 + (i + 1) * h
        if observer is not None and (last or (i + 1) % plan.sample_every == 0):
            observer(FieldState(zf, a))
        if last:
            break
    return Propagation(FieldState(zf, a), termination, max_ratio)


class BatchOutcome(NamedTuple):
    max_intensity_ratio: np.ndarray
    diverged: np.ndarray
    nonfinite: np.ndarray


def propagate_batch(initial: np.ndarray, kappa: float, sigma_r, sigma_i, omega,
                    z_max: float, step: float, cutoff: float,
                    reference_intensity: Optional[float] = None) -> BatchOutcome:
    """Run many parameter sets from one initial state; only peak intensities are kept.

    Rows are numerically independent of each other, and a row leaves the batch
    as soon as it crosses the cutoff or turns non-finite.
    """
    a0 = np.asarray(initial, dtype=complex)
    sigma_r = np.atleast_1d(np.asarray(sigma_r, dtype=float))
    b = sigma_r.shape[0]
    sigma_i = np.broadcast_to(np.asarray(sigma_i, dtype=float), (b,))
    omega = np.broadcast_to(np.asarray(omega, dtype=float), (b,))
    e0 = float(np.sum(a0.real ** 2 + a0.imag ** 2)) if reference_intensity is None else reference_intensity
    parity = np.where(np.arange(a0.shape[0]) % 2 == 0, 1.0, -1.0)

    n = max(1, math.ceil(z_max / step - 1e-9))
    h = z_max / n
    a = np.tile(a0, (b, 1))
    alive = np.arange(b)
    max_ratio = np.full(b, float(np.sum(a0.real ** 2 + a0.imag ** 2)) / e0)
    diverged = np.zeros(b, dtype=bool)
    nonfinite = np.zeros(b, dtype=bool)
    sr, si, om = sigma_r, sigma_i, omega

    def rhs(x, z):
        return apply_lattice_operator(x, sr + 1j * si * np.sin(om * z), kappa, parity)

    for i in range(n):
        a = _rk4_step(a, i * h, h, rhs)
        with np.errstate(over="ignore", invalid="ignore"):
            ratio = np.sum(a.real ** 2 + a.imag ** 2, axis=1) / e0
        bad = ~np.isfinite(ratio)
        max_ratio[alive] = np.fmax(max_ratio[alive], np.where(bad, -np.inf, ratio))
        over = ratio > cutoff
        done = bad | over
        if done.any():
            nonfinite[alive[bad]] = True
            diverged[alive[over]] = True
            keep = ~done
            a, alive = a[keep], alive[keep]
            sr, si, om = sr[keep], si[keep], om[keep]
            if alive.size == 0:
                break
    return BatchOutcome(max_ratio, diverged, nonfinite)


def evolve_const(h: np.ndarray, z: float, amplitudes: np.ndarray) -> np.ndarray:
    """exp(-i H z) applied to ``amplitudes`` via dense eigendecomposition."""
    if z == 0:
        return np.array(amplitudes, dtype=complex)
    try:
        if np.allclose(h, h.conj().T, rtol=0, atol=0):
            w, v = np.linalg.eigh(h)
            return v @ (np.exp(-1j * w * z) * (v.conj().T @ amplitudes))
        w, v = np.linalg.eig(h)
    except np.linalg.LinAlgError as exc:
        raise SingularError(f"eigendecomposition failed: {exc}") from exc
    if np.linalg.cond(v) > 1e12:
        raise SingularError("eigenvector basis is numerically singular (exceptional point?)")
    coeff = np.linalg.solve(v, amplitudes)
    return v @ (np.exp(-1j * w * z) * coeff)


def exact_propagator_const(config: LatticeConfig, sigma_const: complex, z: float,
                           initial: FieldState) -> FieldState:
    """Exact evolution over distance ``z`` for a z-independent mismatch."""
    initial.check_against(config)
    if config.n_guides > EXACT_MAX_GUIDES:
        raise ConfigError(f"dense oracle limited to {EXACT_MAX_GUIDES} guides")
    h = tight_binding_hamiltonian(config.n_guides, config.kappa, complex(sigma_const))
    return FieldState(initial.z + z, evolve_const(h, z, initial.amplitudes))
