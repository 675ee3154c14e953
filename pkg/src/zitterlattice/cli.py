"""Command-line front end: simulate, analytic, compare, sweep, dispersion, rerun.

Exit codes: 0 success, 1 internal failure, 2 config error, 3 numeric failure,
4 run stopped by the divergence cutoff (partial output is still written).
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import compare_center_of_mass, simulate, zb_period
from .dirac_analytic import DEFAULT_NODES, grid_for, map_lattice_to_dirac, prediction
from .dispersion import dispersion_table
from .errors import ConfigError, TooCoarseError, ZitterError
from .lattice_model import LatticeConfig
from .propagator import PropagationPlan, Termination
from .serialization import (
    RunManifest,
    apply_overrides,
    check_sections,
    load_config,
    write_json,
    write_matrix_csv,
    write_series_csv,
)
from .sweep import OMEGA_AXES, SweepSpec, detect_valleys, run_sweep

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DIVERGED = 0, 1, 2, 3, 4
DOCUMENTED_DEVIATION_R = 0.2

log = logging.getLogger("zitterlattice")

_ANALYTIC_DEFAULTS = {"n_nodes": DEFAULT_NODES, "check": True}
_COMPARE_DEFAULTS = {"window_periods": 10.0}
_DISPERSION_DEFAULTS = {"q_points": 201}


def _section(raw, name, defaults):
    body = dict(defaults)
    extra = set(raw.get(name) or {}) - set(defaults)
    if extra:
        raise ConfigError(f"unknown {name} keys: {sorted(extra)}")
    body.update(raw.get(name) or {})
    return body


def resolve(command: str, raw: dict) -> dict:
    """Materialise every default so the manifest fully describes the run."""
    check_sections(raw)
    lattice = LatticeConfig.from_dict(raw.get("lattice") or {})
    out = {"lattice": lattice.to_dict()}
    if command == "sweep":
        sw = dict(raw.get("sweep") or {})
        if "axis_x" not in sw or "axis_y" not in sw:
            raise ConfigError("sweep section needs axis_x and axis_y")
        plan_raw = {"step": 0.02, **(raw.get("plan") or {})}
        spec = SweepSpec.from_dict({**sw, "base_config": lattice.to_dict(), "plan": plan_raw})
        d = spec.to_dict()
        out["plan"] = d.pop("plan")
        d.pop("base_config")
        out["sweep"] = d
        return out
    if command in ("simulate", "analytic", "compare"):
        plan = PropagationPlan.from_dict(raw.get("plan") or {}).resolved(lattice)
        out["plan"] = plan.to_dict()
    if command in ("analytic", "compare"):
        out["analytic"] = _section(raw, "analytic", _ANALYTIC_DEFAULTS)
        if int(out["analytic"]["n_nodes"]) < 3:
            raise ConfigError("analytic.n_nodes must be >= 3")
    if command == "compare":
        out["compare"] = _section(raw, "compare", _COMPARE_DEFAULTS)
        if not out["compare"]["window_periods"] > 0:
            raise ConfigError("compare.window_periods must be positive")
    if command == "dispersion":
        out["dispersion"] = _section(raw, "dispersion", _DISPERSION_DEFAULTS)
        if int(out["dispersion"]["q_points"]) < 2:
            raise ConfigError("dispersion.q_points must be >= 2")
    return out


def _objects(resolved):
    lattice = LatticeConfig.from_dict(resolved["lattice"])
    plan = PropagationPlan.from_dict(resolved["plan"]) if "plan" in resolved else None
    return lattice, plan


def _sample_times(plan: PropagationPlan) -> np.ndarray:
    n = plan.n_steps()
    h = plan.z_max / n
    idx = np.arange(0, n + 1, plan.sample_every)
    if idx[-1] != n:
        idx = np.append(idx, n)
    z = idx * h
    z[-1] = plan.z_max
    return z


# --- commands ---------------------------------------------------------------------


def run_simulate(resolved, out, manifest):
    cfg, plan = _objects(resolved)
    traj = simulate(cfg, plan, keep_map=True)
    a_mod, b_mod = traj.sublattice_moduli
    write_series_csv(
        out / "trajectory.csv", manifest,
        ["z", "center_of_mass", "total_intensity", "width", "participation", "modulus_A", "modulus_B"],
        [traj.z_samples, traj.center_of_mass, traj.total_intensity, traj.width,
         traj.participation, a_mod, b_mod],
        "beam observables along z",
        {"z": "1/kappa", "center_of_mass": "a", "total_intensity": "E/E0", "width": "a",
         "participation": "guides", "modulus_A": "E0 units", "modulus_B": "E0 units"})
    write_matrix_csv(out / "intensity_map.csv", manifest, traj.intensity_map, "z", traj.z_samples,
                     "x", cfg.positions, "guide intensities |a_n(z)|^2")
    manifest.termination = {"simulate": traj.termination.value,
                            "max_intensity_ratio": traj.max_intensity_ratio}
    return EXIT_DIVERGED if traj.diverged else EXIT_OK


def _write_prediction(out, manifest, pred):
    write_series_csv(
        out / "prediction.csv", manifest,
        ["t", "xi_drift_re", "xi_drift_im", "xi_zb_re", "xi_zb_im", "xi_im_re", "xi_im_im",
         "psi_norm_sq", "xi_expectation", "lattice_center_of_mass", "zb_kernel_re", "zb_kernel_im"],
        [pred.t, pred.xi_drift.real, pred.xi_drift.imag, pred.xi_zb.real, pred.xi_zb.imag,
         pred.xi_im.real, pred.xi_im.imag, pred.psi_norm_sq, pred.xi_expectation,
         pred.lattice_center_of_mass, pred.zb_kernel.real, pred.zb_kernel.imag],
        "analytic Dirac prediction",
        {"t": "1/kappa", "xi_expectation": "unit cells (2a)", "lattice_center_of_mass": "a"})


def run_analytic(resolved, out, manifest):
    cfg, plan = _objects(resolved)
    an = resolved["analytic"]
    pred = prediction(map_lattice_to_dirac(cfg), grid_for(cfg, int(an["n_nodes"])),
                      _sample_times(plan), check=bool(an["check"]))
    _write_prediction(out, manifest, pred)
    manifest.termination = {"analytic": "COMPLETED"}
    return EXIT_OK


def run_compare(resolved, out, manifest):
    cfg, plan = _objects(resolved)
    an = resolved["analytic"]
    traj = simulate(cfg, plan)
    pred = prediction(map_lattice_to_dirac(cfg), grid_for(cfg, int(an["n_nodes"])),
                      traj.z_samples, check=bool(an["check"]))
    ana = pred.lattice_center_of_mass
    write_series_csv(
        out / "comparison.csv", manifest,
        ["z", "simulated_center_of_mass", "analytic_center_of_mass", "difference"],
        [traj.z_samples, traj.center_of_mass, ana, traj.center_of_mass - ana],
        "simulated vs analytic beam centre", {"z": "1/kappa", "simulated_center_of_mass": "a",
                                              "analytic_center_of_mass": "a", "difference": "a"})
    payload = {
        "documented_deviation": cfg.gain_ratio_r > DOCUMENTED_DEVIATION_R,
        "termination": traj.termination.value,
    }
    if not traj.diverged and cfg.sigma_r > 0:
        period = zb_period(cfg.sigma_r)
        cmp = compare_center_of_mass(traj.z_samples, traj.center_of_mass, ana, period,
                                     float(resolved["compare"]["window_periods"]))
        payload.update(cmp._asdict())
        payload["zb_period"] = period
    write_json(out / "metrics.json", manifest, payload)
    manifest.termination = {"simulate": traj.termination.value}
    return EXIT_DIVERGED if traj.diverged else EXIT_OK


def run_sweep_cmd(resolved, out, manifest, workers=None):
    lattice = resolved["lattice"]
    spec = SweepSpec.from_dict({**resolved["sweep"], "base_config": lattice, "plan": resolved["plan"]})
    diagram = run_sweep(spec, workers=workers)
    xn, yn = spec.axis_x.name, spec.axis_y.name
    write_matrix_csv(out / "log_max_intensity.csv", manifest, diagram.log_max, yn, diagram.y_values,
                     xn, diagram.x_values, "log10 of peak total intensity / E0")
    codes = diagram.breaking.astype(int) + diagram.nonfinite.astype(int)
    write_matrix_csv(out / "classification.csv", manifest, codes, yn, diagram.y_values, xn,
                     diagram.x_values,
                     "0 = PSEUDO_PT, 1 = PT_BREAKING, 2 = PT_BREAKING after non-finite amplitudes")
    bnd = diagram.boundary()
    write_series_csv(out / "boundary.csv", manifest, [xn, f"{yn}_star"], [bnd[:, 0], bnd[:, 1]],
                     f"smallest breaking {yn} per {xn} column (empty where none breaks)")
    if xn in OMEGA_AXES:
        try:
            report = detect_valleys(diagram).to_dict()
        except TooCoarseError as exc:
            report = {"error": str(exc)}
        write_json(out / "valleys.json", manifest, report)
    manifest.termination = {"sweep": "COMPLETED",
                            "breaking_cells": int(diagram.breaking.sum()),
                            "nonfinite_cells": int(diagram.nonfinite.sum())}
    return EXIT_OK


def run_dispersion(resolved, out, manifest):
    cfg, _ = _objects(resolved)
    q = np.linspace(-math.pi / 2, math.pi / 2, int(resolved["dispersion"]["q_points"]))
    herm = dispersion_table(cfg.kappa, cfg.sigma_r, q)
    cplx = dispersion_table(cfg.kappa, complex(cfg.sigma_r, cfg.sigma_i_amp), q)
    cols = ["q", "re_plus", "im_plus", "re_minus", "im_minus"]
    units = {"q": "1/a", "re_plus": "kappa units"}
    write_series_csv(out / "dispersion_hermitian.csv", manifest, cols, herm.T,
                     f"bands for sigma = {cfg.sigma_r!r}", units)
    write_series_csv(out / "dispersion_complex.csv", manifest, cols, cplx.T,
                     f"bands for sigma = {cfg.sigma_r!r} + {cfg.sigma_i_amp!r} i", units)
    manifest.termination = {"dispersion": "COMPLETED"}
    return EXIT_OK


RUNNERS = {
    "simulate": run_simulate,
    "analytic": run_analytic,
    "compare": run_compare,
    "sweep": run_sweep_cmd,
    "dispersion": run_dispersion,
}


def execute(command: str, resolved: dict, out_dir, workers=None) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(command, resolved, __version__)
    t0 = time.perf_counter()
    try:
        if command == "sweep":
            code = run_sweep_cmd(resolved, out, manifest, workers)
        else:
            code = RUNNERS[command](resolved, out, manifest)
    finally:
        manifest.duration_s = time.perf_counter() - t0
        manifest.write(out)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zitterlattice", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        s = sub.add_parser(name)
        s.add_argument("config", nargs="?", help="YAML config (sections: lattice, plan, ...)")
        s.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config value; may be repeated")
        s.add_argument("-o", "--out", default=f"out_{name}", help="output directory")
        if name == "sweep":
            s.add_argument("--workers", type=int, default=None,
                           help="worker processes (default: $ZBLAT_WORKERS or CPU count)")
    r = sub.add_parser("rerun", help="re-execute the run recorded in a manifest")
    r.add_argument("manifest")
    r.add_argument("-o", "--out", required=True)
    r.add_argument("--workers", type=int, default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "rerun":
            m = RunManifest.read(args.manifest)
            if m.command not in RUNNERS:
                raise ConfigError(f"manifest names unknown command {m.command!r}")
            command, resolved = m.command, resolve(m.command, m.config)
        else:
            command = args.command
            raw = load_config(args.config) if args.config else {}
            resolved = resolve(command, apply_overrides(raw, args.set))
        code = execute(command, resolved, args.out, getattr(args, "workers", None))
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (ZitterError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except Exception as exc:  # noqa: BLE001
        log.exception("internal failure: %s", exc)
        return EXIT_INTERNAL
    if code == EXIT_DIVERGED:
        log.warning("run stopped at the divergence cutoff; partial output written to %s", args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
