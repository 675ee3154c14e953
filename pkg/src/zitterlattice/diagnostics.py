"""Observables extracted from lattice runs and analytic series."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.signal import hilbert

from .errors import NoPeakError, ZeroFieldError
from .lattice_model import FieldState, LatticeConfig, initial_gaussian_field
from .propagator import PropagationPlan, Termination, propagate

DEFAULT_LOCALIZATION_THRESHOLD = 1.0 / 3.0
MIN_PERIODS = 8
PEAK_FLOOR_FACTOR = 3.0
_TINY = 1e-300


class Phase(str, enum.Enum):
    PSEUDO_PT = "PSEUDO_PT"
    PT_BREAKING = "PT_BREAKING"


class Localization(str, enum.Enum):
    LOCALIZED = "LOCALIZED"
    SPREADING = "SPREADING"


def _moments(intensity, positions):
    total = float(np.sum(intensity))
    if not (total > _TINY and math.isfinite(total)):
        raise ZeroFieldError("total intensity is zero or not finite")
    com = float(np.dot(positions, intensity)) / total
    var = float(np.dot((positions - com) ** 2, intensity)) / total
    return total, com, math.sqrt(max(var, 0.0))


def center_of_mass(state: FieldState, positions: Optional[np.ndarray] = None) -> float:
    """Intensity-weighted mean guide position, in units of a from the array centre."""
    x = _centered_positions(state.amplitudes.shape[0]) if positions is None else positions
    return _moments(state.intensity, x)[1]


def rms_width(state: FieldState, positions: Optional[np.ndarray] = None) -> float:
    x = _centered_positions(state.amplitudes.shape[0]) if positions is None else positions
    return _moments(state.intensity, x)[2]


def participation_ratio(state: FieldState) -> float:
    """(sum I)^2 / sum I^2: roughly the number of guides carrying light."""
    i = state.intensity
    den = float(np.sum(i * i))
    if not den > _TINY:
        raise ZeroFieldError("total intensity is zero")
    return float(np.sum(i)) ** 2 / den


def sublattice_moduli(state: FieldState):
    """Summed intensity on the A-guides (even n) and B-guides (odd n)."""
    i = state.intensity
    return float(np.sum(i[0::2])), float(np.sum(i[1::2]))


def _centered_positions(n):
    return np.arange(n, dtype=float) - n // 2


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled observables of one run.  ``total_intensity`` is relative to the launch."""

    z_samples: np.ndarray
    center_of_mass: np.ndarray
    total_intensity: np.ndarray
    width: np.ndarray
    participation: np.ndarray
    sublattice_moduli: tuple
    termination: Termination
    max_intensity_ratio: float
    intensity_map: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.z_samples)
        series = [self.center_of_mass, self.total_intensity, self.width,
                  self.participation, *self.sublattice_moduli]
        if any(len(s) != n for s in series):
            raise ValueError("all trajectory series must match z_samples in length")
        if n and not np.all(self.total_intensity > 0):
            raise ValueError("total intensity must stay positive")

    def __len__(self):
        return len(self.z_samples)

    @property
    def diverged(self) -> bool:
        return self.termination is Termination.DIVERGED


class TrajectoryRecorder:
    """Observer for :func:`propagate` that accumulates per-sample observables."""

    def __init__(self, config: LatticeConfig, reference_intensity: float, keep_map: bool = False):
        self.positions = config.positions
        self.e0 = float(reference_intensity)
        self.keep_map = keep_map
        self.z, self.com, self.total, self.width, self.pr = [], [], [], [], []
        self.mod_a, self.mod_b = [], []
        self.maps = []

    def __call__(self, state: FieldState):
        i = state.intensity
        total, com, width = _moments(i, self.positions)
        self.z.append(state.z)
        self.com.append(com)
        self.total.append(total / self.e0)
        self.width.append(width)
        self.pr.append(total ** 2 / float(np.sum(i * i)))
        self.mod_a.append(float(np.sum(i[0::2])))
        self.mod_b.append(float(np.sum(i[1::2])))
        if self.keep_map:
            self.maps.append(i.copy())

    def trajectory(self, termination: Termination, max_ratio: float) -> Trajectory:
        return Trajectory(
            np.array(self.z), np.array(self.com), np.array(self.total), np.array(self.width),
            np.array(self.pr), (np.array(self.mod_a), np.array(self.mod_b)),
            termination, float(max_ratio),
            np.array(self.maps) if self.keep_map else None)


def simulate(config: LatticeConfig, plan: PropagationPlan = PropagationPlan(),
             keep_map: bool = False, initial: Optional[FieldState] = None) -> Trajectory:
    """Launch the Bragg-tilted Gaussian (or ``initial``) and record observables."""
    state = initial_gaussian_field(config) if initial is None else initial
    rec = TrajectoryRecorder(config, state.total_intensity, keep_map)
    out = propagate(config, plan, state, observer=rec)
    return rec.trajectory(out.termination, out.max_intensity_ratio)


def classify(trajectory, cutoff: float):
    """(phase, log10 of the peak intensity ratio).  Accepts a Trajectory or a bare ratio."""
    peak = getattr(trajectory, "max_intensity_ratio", trajectory)
    peak = float(peak)
    phase = Phase.PT_BREAKING if peak > cutoff else Phase.PSEUDO_PT
    return phase, math.log10(peak) if peak > 0 else -math.inf


# --- oscillation analysis -------------------------------------------------------


class ZBEstimate(NamedTuple):
    rate: float               # angular frequency of the dominant line
    bin_width: float          # angular DFT resolution 2 pi / T
    peak_to_floor: float
    envelope: np.ndarray      # |analytic signal| of the detrended series


def series_of(source):
    """(z, values) from a Trajectory, a DiracPrediction, or a (z, values) pair."""
    if isinstance(source, Trajectory):
        return source.z_samples, source.center_of_mass
    if hasattr(source, "lattice_center_of_mass"):
        return source.t, source.lattice_center_of_mass
    z, v = source
    return np.asarray(z, dtype=float), np.asarray(v, dtype=float)


def detrend_linear(z, values):
    coef = np.polyfit(z, values, 1)
    return values - np.polyval(coef, z)


def zb_frequency(source, min_periods: float = MIN_PERIODS) -> ZBEstimate:
    """Dominant angular frequency of a linearly detrended, Hann-windowed series.

    The peak is refined by a parabola through the log-magnitudes of its neighbours.
    Raises NoPeakError if the line is weaker than three times the median spectral
    floor or if fewer than ``min_periods`` of its periods are covered.
    """
    z, v = series_of(source)
    if len(z) < 16:
        raise NoPeakError("series too short for a spectral estimate")
    dz = np.diff(z)
    if not np.allclose(dz, dz[0], rtol=1e-6, atol=0):
        raise ValueError("zb_frequency needs uniformly spaced samples")
    y = detrend_linear(z, v)
    n = len(y)
    spec = np.abs(np.fft.rfft(y * np.hanning(n)))
    span = dz[0] * n
    bin_width = 2 * math.pi / span
    body = spec[1:]
    j = int(np.argmax(body)) + 1
    floor = float(np.median(body))
    ratio = float(spec[j]) / max(floor, _TINY)
    if ratio < PEAK_FLOOR_FACTOR:
        raise NoPeakError(f"spectral peak only {ratio:.2f}x the median floor")
    offset = 0.0
    if 1 <= j < len(spec) - 1:
        lm, l0, lp = np.log(spec[j - 1:j + 2] + _TINY)
        den = lm - 2 * l0 + lp
        if den < 0:
            offset = 0.5 * (lm - lp) / den
    rate = (j + offset) * bin_width
    if rate * (z[-1] - z[0]) / (2 * math.pi) < min_periods:
        raise NoPeakError(
            f"only {rate * (z[-1] - z[0]) / (2 * math.pi):.1f} periods sampled; need {min_periods}")
    return ZBEstimate(rate, bin_width, ratio, np.abs(hilbert(y)))


def oscillation_amplitude(z, values, period: Optional[float] = None) -> float:
    """Half the peak-to-peak excursion of the oscillating part.

    With ``period`` the slow part is a running mean one period wide and half a
    period is trimmed at each end; otherwise a straight-line fit is removed.
    """
    z = np.asarray(z, dtype=float)
    v = np.asarray(values, dtype=float)
    if period is None:
        y = detrend_linear(z, v)
    else:
        y = running_mean_detrend(z, v, period)
        inner = (z >= z[0] + 0.5 * period) & (z <= z[-1] - 0.5 * period)
        if inner.sum() >= 2:
            y = y[inner]
    return 0.5 * float(np.ptp(y))


def rms_deviation(a, b) -> float:
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.sqrt(np.mean(d * d)))


def running_mean_detrend(z, values, window: float):
    """Subtract a centred running mean over ``window`` (in z units), edges shrinking."""
    z = np.asarray(z, dtype=float)
    v = np.asarray(values, dtype=float)
    half = max(1, int(round(0.5 * window / (z[1] - z[0]))))
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(len(v))
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, len(v))
    return v - (c[hi] - c[lo]) / (hi - lo)


def zero_crossings(z, values, window: Optional[float] = None) -> np.ndarray:
    """Linearly interpolated zero-crossing positions, after optional running-mean detrend."""
    z = np.asarray(z, dtype=float)
    y = running_mean_detrend(z, values, window) if window else np.asarray(values, dtype=float)
    s = np.signbit(y)
    i = np.nonzero(s[:-1] != s[1:])[0]
    return z[i] - y[i] * (z[i + 1] - z[i]) / (y[i + 1] - y[i])


def crossing_offsets(reference, other) -> np.ndarray:
    """Distance from each reference crossing to the nearest crossing in ``other``."""
    reference = np.asarray(reference, dtype=float)
    other = np.sort(np.asarray(other, dtype=float))
    if other.size == 0:
        return np.full(reference.shape, np.inf)
    j = np.clip(np.searchsorted(other, reference), 1, max(other.size - 1, 1))
    left = np.abs(reference - other[j - 1])
    right = np.abs(reference - other[np.minimum(j, other.size - 1)])
    return np.minimum(left, right)


# --- localization -----------------------------------------------------------------


def width_growth_rate(trajectory: Trajectory) -> float:
    """Slope of a straight-line fit to width(z) over the final half of the run."""
    z = trajectory.z_samples
    keep = z >= z[0] + 0.5 * (z[-1] - z[0])
    if keep.sum() < 2:
        raise ValueError("not enough samples in the final half")
    return float(np.polyfit(z[keep], trajectory.width[keep], 1)[0])


def free_spread_rate(config: LatticeConfig, plan: PropagationPlan = PropagationPlan()) -> float:
    """Width growth rate of the same launch with gain/loss switched off."""
    return width_growth_rate(simulate(config.with_(gain_ratio_r=0.0), plan))


def localization_metric(trajectory: Trajectory, free_rate: float,
                        threshold: float = DEFAULT_LOCALIZATION_THRESHOLD):
    """(verdict, fitted rate): LOCALIZED if rate < threshold * free_rate."""
    if trajectory.diverged:
        raise ValueError("localization is undefined for a diverged run")
    if not free_rate > 0:
        raise ValueError("free spreading rate must be positive")
    rate = width_growth_rate(trajectory)
    verdict = Localization.LOCALIZED if rate < threshold * free_rate else Localization.SPREADING
    return verdict, rate


# --- simulation vs. analytic ----------------------------------------------------


class Comparison(NamedTuple):
    window: float             # compared z-range, starting at the first sample
    rms: float                # RMS of (simulated - analytic) in units of a
    amplitude: float          # ZB amplitude of the simulated series
    relative_rms: float       # rms / amplitude
    median_phase_offset: float  # zero-crossing offsets in units of the ZB period
    max_phase_offset: float
    crossings: int


def zb_period(sigma_r: float) -> float:
    """Trembling period 2 pi / (2 sigma_r) set by the zone-edge gap."""
    return math.pi / sigma_r


def compare_center_of_mass(z, simulated, analytic, period: float,
                           window_periods: float = 10.0) -> Comparison:
    """RMS deviation and zero-crossing phase agreement over the first ``window_periods``.

    Crossings are taken after removing a running mean one period wide, so the
    drift and slow amplitude changes do not shift them.
    """
    z = np.asarray(z, dtype=float)
    keep = z <= z[0] + window_periods * period * (1 + 1e-12)
    zs, s, a = z[keep], np.asarray(simulated)[keep], np.asarray(analytic)[keep]
    rms = rms_deviation(s, a)
    amp = oscillation_amplitude(zs, s, period)
    cs = zero_crossings(zs, s, period)
    ca = zero_crossings(zs, a, period)
    off = crossing_offsets(cs, ca) / period
    med = float(np.median(off)) if off.size else math.inf
    mx = float(np.max(off)) if off.size else math.inf
    return Comparison(float(zs[-1] - zs[0]), rms, amp, rms / amp if amp > 0 else math.inf,
                      med, mx, int(cs.size))
