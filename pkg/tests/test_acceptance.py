"""Acceptance criteria, one test per criterion.

Each test prints a single ``CRITERION n: PASS|FAIL ...`` line (visible even
under output capture) and then asserts.  Run on its own with

    pytest tests/test_acceptance.py -v
"""
import json
import math
import sys

import numpy as np
import pytest

from zitterlattice import dirac_analytic as da
from zitterlattice.cli import main as cli_main
from zitterlattice.diagnostics import (
    Localization,
    Phase,
    compare_center_of_mass,
    free_spread_rate,
    localization_metric,
    simulate,
    zb_frequency,
    zb_period,
)
from zitterlattice.dispersion import bloch_matrix, dispersion_exact, dispersion_small_imag
from zitterlattice.lattice_model import (
    FieldState,
    LatticeConfig,
    apply_lattice_operator,
    initial_gaussian_field,
)
from zitterlattice.propagator import (
    PropagationPlan,
    exact_propagator_const,
    propagate,
    rk4_integrate,
)
from zitterlattice.sweep import Axis, SweepSpec, detect_valleys, fit_base_frequency_slope, run_sweep

SIGMA = 2.1
T_ZB = zb_period(SIGMA)
COMPARE_TOL = 0.05            # relative RMS tolerance shared by criteria 2 and 3
VALLEY_NEAR = 0.15            # how close a detected valley must sit to a target position
RATIO_TOL = 0.10
SWEEP_PLAN = PropagationPlan(z_max=120.0, step=0.02)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
    return emit


def compare_run(r, omega, window_periods=10):
    cfg = LatticeConfig(sigma_r=SIGMA, gain_ratio_r=r, omega=omega)
    plan = PropagationPlan(z_max=window_periods * T_ZB + 1.0, sample_every=2)
    traj = simulate(cfg, plan)
    pred = da.prediction(da.map_lattice_to_dirac(cfg), da.grid_for(cfg), traj.z_samples)
    return compare_center_of_mass(traj.z_samples, traj.center_of_mass,
                                  pred.lattice_center_of_mass, T_ZB, window_periods)


# 1 -----------------------------------------------------------------------------

def test_criterion_1_hermitian_zb_frequency(report):
    cfg = LatticeConfig(sigma_r=SIGMA)
    traj = simulate(cfg, PropagationPlan(z_max=40 * T_ZB, sample_every=4))
    est = zb_frequency(traj)
    periods = est.rate * traj.z_samples[-1] / (2 * math.pi)
    ok = abs(est.rate - 2 * SIGMA) <= est.bin_width and periods >= 20
    report(1, ok, f"rate={est.rate:.4f} target={2 * SIGMA} bin={est.bin_width:.4f} periods={periods:.1f}")
    assert ok


# 2 -----------------------------------------------------------------------------

def test_criterion_2_weak_gain_agreement(report):
    rows = {w: compare_run(0.2, w) for w in (0.2, 1.0, 3.0)}
    ok = all(c.relative_rms < COMPARE_TOL for c in rows.values())
    detail = " ".join(f"w={w}:rms/amp={c.relative_rms:.4f}" for w, c in rows.items())
    report(2, ok, detail + f" (tol {COMPARE_TOL})")
    assert ok


# 3 -----------------------------------------------------------------------------

def test_criterion_3_documented_deviation(report):
    c = compare_run(0.5, 1.0)
    ok = c.relative_rms > COMPARE_TOL and c.median_phase_offset < 0.10
    report(3, ok, f"rms/amp={c.relative_rms:.4f} (must exceed {COMPARE_TOL}) "
                  f"median crossing offset={c.median_phase_offset:.4f} T_ZB over {c.crossings} crossings "
                  f"(max {c.max_phase_offset:.3f})")
    assert ok


# 4 -----------------------------------------------------------------------------

def test_criterion_4_frequency_insensitive_to_modulation(report):
    rates = {}
    for w in (0.2, 3.0):
        cfg = LatticeConfig(sigma_r=SIGMA, gain_ratio_r=0.2, omega=w)
        rates[w] = zb_frequency(simulate(cfg, PropagationPlan(z_max=40 * T_ZB, sample_every=4))).rate
    rel = abs(rates[0.2] - rates[3.0]) / rates[3.0]
    ok = rel < 0.05
    report(4, ok, f"rate(w=0.2)={rates[0.2]:.4f} rate(w=3.0)={rates[3.0]:.4f} rel diff={rel:.4f}")
    assert ok


# 5 -----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def valley_diagram():
    spec = SweepSpec(Axis("omega_ratio", 0.1, 6.5, 96), Axis("r", 0.0, 1.2, 96),
                     LatticeConfig(sigma_r=SIGMA), SWEEP_PLAN)
    return run_sweep(spec)


def match_targets(positions, targets):
    found = {}
    for t in targets:
        if positions.size:
            j = int(np.argmin(np.abs(positions - t)))
            if abs(positions[j] - t) <= VALLEY_NEAR * t:
                found[t] = float(positions[j])
    return found


def test_criterion_5_resonance_valleys(report, valley_diagram):
    rep = detect_valleys(valley_diagram)
    targets = (4.2, 1.5, 0.9, 0.6)
    found = match_targets(rep.positions, targets)
    expected_ratio = {4.2: 1, 1.5: 3, 0.9: 5, 0.6: 7}
    ratio_ok = {}
    if 4.2 in found:
        for t, w in found.items():
            ratio = found[4.2] / w
            ratio_ok[t] = (ratio, abs(ratio / expected_ratio[t] - 1) <= RATIO_TOL)
    ok = len(found) == 4 and all(v[1] for v in ratio_ok.values())
    report(5, ok, "valleys=" + ",".join(f"{p:.3f}" for p in rep.positions)
           + " matched=" + ",".join(f"{t}->{w:.3f}" for t, w in found.items())
           + " ratios=" + ",".join(f"{v[0]:.2f}" for v in ratio_ok.values()))
    assert ok


def test_sweep_small_r_is_pseudo_pt_and_low_omega_breaks(valley_diagram):
    d = valley_diagram
    omegas = d.x_values
    above_floor = omegas >= d.spec.low_omega_floor
    assert not d.breaking[0, :].any()             # r = 0 row
    assert not d.breaking[1, above_floor].any()   # smallest r > 0
    # the lowest-frequency column breaks at smaller r than anything near the ZB valley
    idx = d.boundary_index()
    assert idx[0] < d.breaking.shape[0]
    assert d.breaking[-1, 0]


def test_sweep_boundary_robust_to_cutoff(valley_diagram):
    hi = valley_diagram.boundary_index()
    lo = valley_diagram.reclassify(1e6).boundary_index()
    both = (hi < valley_diagram.breaking.shape[0])
    assert np.all(np.abs(hi[both] - lo[both]) < 2)


# 6 -----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def base_frequencies():
    out = {}
    for s in (1.1, 1.5, 2.1, 2.5, 3.1):
        spec = SweepSpec(Axis("omega_ratio", 0.3, 3.5 * s, 64), Axis("r", 0.0, 1.2, 32),
                         LatticeConfig(sigma_r=s), SWEEP_PLAN)
        out[s] = detect_valleys(run_sweep(spec)).base_frequency
    return out


def test_criterion_6_base_frequency_scaling(report, base_frequencies):
    s = np.array(list(base_frequencies))
    w = np.array(list(base_frequencies.values()))
    slope = fit_base_frequency_slope(s, w)
    ok = abs(slope - 2.0) <= 0.2
    report(6, ok, "omega1=" + ",".join(f"{k}:{v:.3f}" for k, v in base_frequencies.items())
           + f" slope={slope:.4f} (target 2 +- 10%)")
    assert ok


# 7 -----------------------------------------------------------------------------

def test_criterion_7_localization_dichotomy(report):
    base = LatticeConfig(sigma_r=SIGMA, gain_ratio_r=0.5)
    plan = PropagationPlan(z_max=120.0, step=0.01, sample_every=10)
    free = free_spread_rate(base, plan)
    verdicts = {}
    for w in (4.0, 3.5):
        verdicts[w] = localization_metric(simulate(base.with_(omega=w), plan), free)
    ok = verdicts[4.0][0] is Localization.LOCALIZED and verdicts[3.5][0] is Localization.SPREADING
    report(7, ok, f"free rate={free:.4f} " + " ".join(
        f"w={w}:{v[0].value}(rate {v[1]:.4f}, ratio {v[1] / free:.2f})" for w, v in verdicts.items()))
    assert ok


# 8 -----------------------------------------------------------------------------

def _rk4_const(cfg, sigma, z, n_steps, a0):
    parity = cfg.parity
    return rk4_integrate(lambda a, _z: apply_lattice_operator(a, sigma, cfg.kappa, parity),
                         a0, 0.0, z, n_steps)


def test_criterion_8_oracle_suite(report):
    rng = np.random.default_rng(2024)
    checks = {}

    worst = 0.0
    for trial in range(12):
        n = int(rng.choice([8, 16, 32, 64]))
        cfg = LatticeConfig(n_guides=n, spacing_a=1.0, spot_size=2.0,
                            kappa=float(rng.uniform(0.5, 1.5)), sigma_r=float(rng.uniform(0, 3)))
        init = FieldState(0.0, rng.normal(size=n) + 1j * rng.normal(size=n))
        sigma = complex(cfg.sigma_r, rng.uniform(0, 0.5) if trial % 2 else 0.0)
        ref = exact_propagator_const(cfg, sigma, 3.0, init).amplitudes
        if sigma.imag == 0:
            got = propagate(cfg, PropagationPlan(z_max=3.0, step=0.002), init).state.amplitudes
        else:
            got = _rk4_const(cfg, sigma, 3.0, 1500, init.amplitudes)
        worst = max(worst, np.linalg.norm(got - ref) / np.linalg.norm(ref))
    checks["rk4_vs_exact"] = (worst < 1e-6, f"{worst:.2e}")

    cfg = LatticeConfig(n_guides=32, spacing_a=1.0, spot_size=2.0, sigma_r=2.1)
    init = FieldState(0.0, rng.normal(size=32) + 1j * rng.normal(size=32))
    ref = exact_propagator_const(cfg, 2.1 + 0.3j, 5.0, init).amplitudes
    errs = [np.linalg.norm(_rk4_const(cfg, 2.1 + 0.3j, 5.0, n, init.amplitudes) - ref)
            for n in (50, 100, 200, 400)]
    order = float(np.polyfit(np.log([50, 100, 200, 400]), -np.log(errs), 1)[0])
    checks["order"] = (abs(order - 4.0) <= 0.2, f"{order:.3f}")

    cfg = LatticeConfig(sigma_r=SIGMA)
    init = initial_gaussian_field(cfg)
    out = propagate(cfg, PropagationPlan(), init)
    drift = abs(out.state.total_intensity / init.total_intensity - 1)
    checks["norm"] = (drift < 1e-8, f"{drift:.2e}")

    kap = rng.uniform(0.1, 3, 1000)
    sig = rng.uniform(-3, 3, 1000) + 1j * rng.uniform(-3, 3, 1000)
    q = rng.uniform(-math.pi, math.pi, 1000)
    plus, minus = dispersion_exact(kap, sig, q)
    dev = 0.0
    for k in range(1000):
        ev = np.linalg.eigvals(bloch_matrix(kap[k], sig[k], q[k]))
        mine = np.array([plus[k], minus[k]])
        # pair each analytic branch with the nearest eigenvalue
        dev = max(dev, max(np.min(np.abs(ev - m)) for m in mine) / max(1.0, abs(plus[k])))
    checks["dispersion_oracle"] = (dev < 1e-12, f"{dev:.2e}")

    ratios = np.array([0.02, 0.04, 0.08, 0.16, 0.3])
    qs = np.linspace(-math.pi / 2, math.pi / 2, 201)
    errs = []
    for x in ratios:
        ex, _ = dispersion_exact(1.0, SIGMA * (1 + 1j * x), qs)
        ap, _ = dispersion_small_imag(1.0, SIGMA, SIGMA * x, qs)
        errs.append(np.max(np.abs(ex - ap) / np.abs(ex)))
    slope = float(np.polyfit(np.log(ratios), np.log(errs), 1)[0])
    checks["expansion_quadratic"] = (abs(slope - 2.0) <= 0.2, f"{slope:.3f}")

    ok = all(v[0] for v in checks.values())
    report(8, ok, " ".join(f"{k}={'ok' if v[0] else 'BAD'}({v[1]})" for k, v in checks.items()))
    assert ok


# 9 -----------------------------------------------------------------------------

def test_criterion_9_analytic_identities(report):
    cfg = LatticeConfig(sigma_r=SIGMA)
    grid = da.grid_for(cfg)
    t = np.linspace(0, 20 * T_ZB, 801)
    herm = da.prediction(da.map_lattice_to_dirac(cfg), grid, t)
    drift = (herm.xi_drift / herm.psi_norm_sq).real
    resid = np.max(np.abs(drift - np.polyval(np.polyfit(t, drift, 1), t)))
    checks = {
        "xi_im_zero": (bool(np.all(herm.xi_im == 0)), f"{np.max(np.abs(herm.xi_im)):.1e}"),
        "linear_drift": (resid < 1e-9, f"{resid:.1e}"),
    }
    floor = math.inf
    unresolved = []
    for r in (0.0, 0.2, 0.5, 1.0):
        for w in (0.2, 1.0, 3.0, 4.2):
            p = da.map_lattice_to_dirac(cfg.with_(gain_ratio_r=r, omega=w))
            try:
                pred = da.prediction(p, grid, t)       # doubling check is on by default
            except da.QuadratureUnresolvedError as exc:
                unresolved.append(f"r={r},w={w}: {exc}")
                pred = da.prediction(p, grid, t, check=False)
            floor = min(floor, float(pred.psi_norm_sq.min()))
    checks["norm_floor"] = (floor >= 1 - 1e-9, f"min |psi|^2={floor:.12f}")
    checks["quadrature_doubling"] = (not unresolved, "; ".join(unresolved) or "stable")
    ok = all(v[0] for v in checks.values())
    report(9, ok, " ".join(f"{k}={'ok' if v[0] else 'BAD'}({v[1]})" for k, v in checks.items()))
    assert ok


# 10 ----------------------------------------------------------------------------

def test_criterion_10_determinism(report, tmp_path):
    spec = SweepSpec(Axis("omega_ratio", 0.5, 6.0, 12), Axis("r", 0.0, 1.2, 8),
                     LatticeConfig(sigma_r=SIGMA), PropagationPlan(z_max=30.0, step=0.02))
    serial = run_sweep(spec, workers=1)
    parallel = run_sweep(spec, workers=3)
    grids_equal = (np.array_equal(serial.log_max, parallel.log_max)
                   and np.array_equal(serial.breaking, parallel.breaking))

    identical = []
    for cmd, extra in (("simulate", ["--set", "plan.z_max=10", "--set", "lattice.gain_ratio_r=0.2",
                                     "--set", "lattice.omega=3.0", "--set", "plan.sample_every=10"]),
                       ("analytic", ["--set", "plan.z_max=10", "--set", "plan.sample_every=10"])):
        first, second = tmp_path / f"{cmd}1", tmp_path / f"{cmd}2"
        assert cli_main([cmd, *extra, "-o", str(first)]) == 0
        assert cli_main(["rerun", str(first / "manifest.json"), "-o", str(second)]) == 0
        outputs = json.loads((first / "manifest.json").read_text())["outputs"]
        identical.append(all((first / f).read_bytes() == (second / f).read_bytes() for f in outputs))
    ok = grids_equal and all(identical)
    report(10, ok, f"serial==parallel: {grids_equal} manifest reruns byte-identical: {all(identical)}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
