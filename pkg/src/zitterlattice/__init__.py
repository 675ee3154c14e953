"""Zitterbewegung of light in a binary waveguide superlattice with modulated gain/loss."""
from .errors import (
    ConfigError,
    ExpansionInvalidError,
    NoPeakError,
    NonFiniteError,
    QuadratureUnresolvedError,
    SingularError,
    TooCoarseError,
    ZeroFieldError,
    ZitterError,
)
from .lattice_model import FieldState, LatticeConfig, initial_gaussian_field
from .propagator import PropagationPlan, Termination, exact_propagator_const, propagate
from .dirac_analytic import DiracParams, DiracPrediction, SpectralGrid, map_lattice_to_dirac, prediction
from .diagnostics import Phase, Localization, Trajectory, simulate
from .sweep import Axis, PhaseDiagram, SweepSpec, detect_valleys, run_sweep

__version__ = "0.1.0"
