"""Two-parameter phase-diagram sweeps, boundary extraction and valley detection.

Each grid column is one work unit: all its cells are integrated together as a
batch (rows are arithmetically independent), so the grid does not depend on
how columns are distributed over worker processes.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.signal import find_peaks

from .errors import ConfigError, TooCoarseError
from .lattice_model import LatticeConfig, initial_gaussian_field
from .propagator import PropagationPlan, propagate_batch

AXES = ("r", "omega_ratio", "sigma_ratio", "inv_omega_ratio")
OMEGA_AXES = ("omega_ratio", "inv_omega_ratio")
WORKERS_ENV = "ZBLAT_WORKERS"
MIN_GRID = 8
MIN_VALLEY_COLUMNS = 64
MIN_COVERAGE = 0.5
DEFAULT_SWEEP_STEP = 0.02


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    size: int

    def __post_init__(self):
        for v in (self.start, self.stop, self.size):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"axis {self.name}: bounds and size must be numbers, got {v!r}")
        if self.name not in AXES:
            raise ConfigError(f"unknown axis {self.name!r}; choose from {AXES}")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)) or not self.start < self.stop:
            raise ConfigError(f"axis {self.name}: need finite start < stop")
        if int(self.size) != self.size or self.size < MIN_GRID:
            raise ConfigError(f"axis {self.name}: grid size must be an integer >= {MIN_GRID}")
        if self.start < 0:
            raise ConfigError(f"axis {self.name}: values must be non-negative")
        if self.name == "inv_omega_ratio" and self.start <= 0:
            raise ConfigError("inv_omega_ratio axis must start above 0")
        object.__setattr__(self, "size", int(self.size))
        object.__setattr__(self, "start", float(self.start))
        object.__setattr__(self, "stop", float(self.stop))

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.size)

    def to_dict(self):
        return {"name": self.name, "start": self.start, "stop": self.stop, "size": self.size}


def _plan_default():
    return PropagationPlan(step=DEFAULT_SWEEP_STEP)


@dataclass(frozen=True)
class SweepSpec:
    """Grid of cells (y_j, x_i); columns run along ``axis_x``.

    ``sigma_i_ratio`` pins sigma_i/kappa instead of the gain ratio r (the
    sigma_r-omega plane at fixed gain/loss).
    """

    axis_x: Axis
    axis_y: Axis
    base_config: LatticeConfig = field(default_factory=LatticeConfig)
    plan: PropagationPlan = field(default_factory=_plan_default)
    sigma_i_ratio: Optional[float] = None
    low_omega_floor: float = 0.3

    def __post_init__(self):
        if self.axis_x.name == self.axis_y.name:
            raise ConfigError("sweep axes must be distinct")
        names = {self.axis_x.name, self.axis_y.name}
        if names >= set(OMEGA_AXES):
            raise ConfigError("omega_ratio and inv_omega_ratio describe the same parameter")
        if self.plan.step is None:
            raise ConfigError("sweeps need an explicit plan step")
        if self.sigma_i_ratio is not None:
            if "r" in names:
                raise ConfigError("sigma_i_ratio fixes the gain/loss; r cannot also be an axis")
            if not self.sigma_i_ratio >= 0:
                raise ConfigError("sigma_i_ratio must be >= 0")
        # every cell must be resolvable by the shared step
        max_omega = self.base_config.omega
        for ax in (self.axis_x, self.axis_y):
            if ax.name == "omega_ratio":
                max_omega = ax.stop * self.base_config.omega0
            elif ax.name == "inv_omega_ratio":
                max_omega = self.base_config.omega0 / ax.start
        if max_omega > 0 and self.plan.step > 2 * math.pi / max_omega / 20 * (1 + 1e-12):
            raise ConfigError(f"plan step {self.plan.step} cannot resolve omega = {max_omega:g}")

    @property
    def shape(self):
        return self.axis_y.size, self.axis_x.size

    def cell_parameters(self, x_value, y_values):
        """(sigma_r, sigma_i, omega) arrays for one column."""
        cfg = self.base_config
        y = np.asarray(y_values, dtype=float)
        p = {"r": np.full_like(y, cfg.gain_ratio_r),
             "sigma_r": np.full_like(y, cfg.sigma_r),
             "omega": np.full_like(y, cfg.omega)}
        for name, v in ((self.axis_x.name, np.full_like(y, x_value)), (self.axis_y.name, y)):
            if name == "r":
                p["r"] = v
            elif name == "omega_ratio":
                p["omega"] = v * cfg.omega0
            elif name == "inv_omega_ratio":
                p["omega"] = cfg.omega0 / v
            elif name == "sigma_ratio":
                p["sigma_r"] = v * cfg.kappa
        if self.sigma_i_ratio is not None:
            sigma_i = np.full_like(y, self.sigma_i_ratio * cfg.kappa)
        else:
            sigma_i = p["r"] * p["sigma_r"]
        return p["sigma_r"], sigma_i, p["omega"]

    def cell_config(self, i: int, j: int) -> LatticeConfig:
        """The LatticeConfig a single cell stands for."""
        sr, si, om = self.cell_parameters(self.axis_x.values[i], self.axis_y.values[j:j + 1])
        r = si[0] / sr[0] if sr[0] > 0 else 0.0
        return self.base_config.with_(sigma_r=float(sr[0]), gain_ratio_r=float(r), omega=float(om[0]))

    def to_dict(self) -> dict:
        return {
            "axis_x": self.axis_x.to_dict(),
            "axis_y": self.axis_y.to_dict(),
            "base_config": self.base_config.to_dict(),
            "plan": self.plan.to_dict(),
            "sigma_i_ratio": self.sigma_i_ratio,
            "low_omega_floor": self.low_omega_floor,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        known = {"axis_x", "axis_y", "base_config", "plan", "sigma_i_ratio", "low_omega_floor"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown sweep keys: {sorted(unknown)}")
        kw = dict(data)
        for key in ("axis_x", "axis_y"):
            try:
                kw[key] = Axis(**data[key])
            except (TypeError, KeyError) as exc:
                raise ConfigError(f"{key} needs exactly name, start, stop, size: {exc}") from None
        if "base_config" in data:
            kw["base_config"] = LatticeConfig.from_dict(data["base_config"])
        if "plan" in data:
            kw["plan"] = PropagationPlan.from_dict(data["plan"])
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class PhaseDiagram:
    spec: SweepSpec
    log_max: np.ndarray = field(repr=False)      # (ny, nx) log10 peak intensity ratio
    breaking: np.ndarray = field(repr=False)     # (ny, nx) bool
    nonfinite: np.ndarray = field(repr=False)    # (ny, nx) bool
    cutoff: float = 1e9

    @property
    def x_values(self):
        return self.spec.axis_x.values

    @property
    def y_values(self):
        return self.spec.axis_y.values

    def reclassify(self, cutoff: float) -> "PhaseDiagram":
        """Re-threshold at a lower cutoff; runs stopped at the original cutoff cannot be raised."""
        if cutoff > self.cutoff:
            raise ValueError("cannot raise the cutoff above the one the sweep ran with")
        breaking = (self.log_max > math.log10(cutoff)) | self.nonfinite
        return replace(self, breaking=breaking, cutoff=float(cutoff))

    def boundary_mask(self) -> np.ndarray:
        """Breaking cells with at least one pseudo-PT 4-neighbour."""
        b = self.breaking
        ok = ~b
        edge = np.zeros_like(b)
        edge[1:, :] |= ok[:-1, :]
        edge[:-1, :] |= ok[1:, :]
        edge[:, 1:] |= ok[:, :-1]
        edge[:, :-1] |= ok[:, 1:]
        return b & edge

    def boundary_index(self) -> np.ndarray:
        """Per column, the first row (lowest y) classified breaking; ny where none breaks."""
        b = self.breaking
        first = np.argmax(b, axis=0)
        return np.where(b.any(axis=0), first, b.shape[0])

    def boundary(self) -> np.ndarray:
        """Polyline rows (x, y*) with y* the smallest breaking y per column (NaN if none)."""
        idx = self.boundary_index()
        y = self.y_values
        ystar = np.where(idx < len(y), y[np.minimum(idx, len(y) - 1)], np.nan)
        return np.column_stack([self.x_values, ystar])


def _column(args):
    spec, i, a0 = args
    sr, si, om = spec.cell_parameters(spec.axis_x.values[i], spec.axis_y.values)
    out = propagate_batch(a0, spec.base_config.kappa, sr, si, om, spec.plan.z_max,
                          spec.plan.step, spec.plan.divergence_cutoff)
    return i, out


def worker_count(workers: Optional[int] = None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        else:
            workers = os.cpu_count() or 1
    if workers < 1:
        raise ConfigError("worker count must be >= 1")
    return workers


def run_sweep(spec: SweepSpec, workers: Optional[int] = None) -> PhaseDiagram:
    """Fill every cell of ``spec``.  ``workers=1`` runs in-process."""
    ny, nx = spec.shape
    a0 = initial_gaussian_field(spec.base_config).amplitudes
    peak = np.empty((ny, nx))
    breaking = np.zeros((ny, nx), dtype=bool)
    nonfinite = np.zeros((ny, nx), dtype=bool)
    jobs = [(spec, i, a0) for i in range(nx)]
    n = worker_count(workers)
    if n == 1:
        results = map(_column, jobs)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=n)
        results = pool.map(_column, jobs)
    try:
        for i, out in results:
            peak[:, i] = out.max_intensity_ratio
            nonfinite[:, i] = out.nonfinite
            breaking[:, i] = out.diverged | out.nonfinite
    finally:
        if pool is not None:
            pool.shutdown()
    with np.errstate(divide="ignore"):
        log_max = np.log10(peak)
    return PhaseDiagram(spec, log_max, breaking, nonfinite, spec.plan.divergence_cutoff)


# --- valleys --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ValleyReport:
    positions: np.ndarray      # omega/omega0, sorted descending (sub-column when refined)
    columns: np.ndarray        # grid column of each valley
    depths: np.ndarray         # boundary value y* at each valley
    ratios: np.ndarray         # omega_1 / omega_j (inverse-frequency ratios)
    coverage: float

    @property
    def base_frequency(self) -> float:
        return float(self.positions[0]) if self.positions.size else math.nan

    def to_dict(self) -> dict:
        return {
            "positions": [float(v) for v in self.positions],
            "columns": [int(v) for v in self.columns],
            "depths": [float(v) for v in self.depths],
            "ratios": [float(v) for v in self.ratios],
            "coverage": float(self.coverage),
            "base_frequency": self.base_frequency,
        }


def column_omegas(spec: SweepSpec) -> np.ndarray:
    if spec.axis_x.name == "omega_ratio":
        return spec.axis_x.values.copy()
    if spec.axis_x.name == "inv_omega_ratio":
        return 1.0 / spec.axis_x.values
    raise ConfigError("valley detection needs omega_ratio or inv_omega_ratio on the column axis")


def _refine(trace, p):
    """Fractional column of a minimum: parabola through the flanks of its plateau."""
    m = trace[p]
    lo = p
    while lo > 0 and trace[lo - 1] == m:
        lo -= 1
    hi = p
    while hi < len(trace) - 1 and trace[hi + 1] == m:
        hi += 1
    centre = 0.5 * (lo + hi)
    if lo == 0 or hi == len(trace) - 1:
        return centre
    half = 0.5 * (hi - lo) + 1.0
    left, right = trace[lo - 1], trace[hi + 1]
    den = left - 2 * m + right
    if den <= 0:
        return centre
    off = 0.5 * half * (left - right) / den
    return centre + float(np.clip(off, -0.5 * half, 0.5 * half))


def detect_valleys(diagram: PhaseDiagram, floor: Optional[float] = None,
                   window: int = 2, prominence: float = 1.0, refine: bool = True) -> ValleyReport:
    """Local minima of the boundary row index along the omega axis.

    A valley is a column whose boundary row is the lowest within +-``window``
    columns and stands at least ``prominence`` rows below its surroundings.
    Columns below the low-frequency floor are ignored.  With ``refine`` the
    position is moved off the column grid by a parabola through the minimum
    (or the plateau it belongs to) and its two flanking columns.
    """
    spec = diagram.spec
    omegas = column_omegas(spec)
    if len(omegas) < MIN_VALLEY_COLUMNS:
        raise TooCoarseError(f"need >= {MIN_VALLEY_COLUMNS} omega columns, have {len(omegas)}")
    floor = spec.low_omega_floor if floor is None else floor
    trace = diagram.boundary_index().astype(float)
    ny = diagram.breaking.shape[0]
    use = omegas >= floor
    coverage = float(np.mean(trace[use] < ny)) if use.any() else 0.0
    if coverage < MIN_COVERAGE:
        raise TooCoarseError(f"boundary found in only {coverage:.0%} of columns")

    peaks, _ = find_peaks(-trace, prominence=prominence)
    keep = []
    for p in peaks:
        lo, hi = max(0, p - window), min(len(trace), p + window + 1)
        if trace[p] <= trace[lo:hi].min() and trace[p] < ny and omegas[p] >= floor:
            keep.append(p)
    cols = np.array(sorted(keep, key=lambda c: -omegas[c]), dtype=int)
    ax = spec.axis_x
    step = (ax.stop - ax.start) / (ax.size - 1)
    if refine:
        values = np.array([ax.start + _refine(trace, c) * step for c in cols])
        pos = 1.0 / values if ax.name == "inv_omega_ratio" else values
    else:
        pos = omegas[cols]
    y = diagram.y_values
    depths = y[trace[cols].astype(int)] if cols.size else np.array([])
    ratios = pos[0] / pos if cols.size else np.array([])
    return ValleyReport(pos, cols, depths, ratios, coverage)


def fit_base_frequency_slope(sigma_ratios, base_frequencies) -> float:
    """Least-squares slope s of omega_1 = s * sigma_r/kappa through the origin."""
    s = np.asarray(sigma_ratios, dtype=float)
    w = np.asarray(base_frequencies, dtype=float)
    return float(np.dot(s, w) / np.dot(s, s))
