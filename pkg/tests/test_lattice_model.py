import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from zitterlattice.errors import ConfigError
from zitterlattice.lattice_model import (
    FieldState,
    LatticeConfig,
    apply_lattice_operator,
    coupled_mode_rhs,
    hamiltonian,
    initial_gaussian_field,
    sigma_at,
    tight_binding_hamiltonian,
)


def test_defaults_resolve_omega0_to_kappa():
    cfg = LatticeConfig(kappa=0.14)
    assert cfg.omega0 == 0.14
    assert cfg.n_guides == 200 and cfg.spot_in_guides == pytest.approx(105 / 16)


@pytest.mark.parametrize("bad", [
    {"n_guides": 201}, {"n_guides": 2}, {"kappa": 0.0}, {"sigma_r": -1.0},
    {"gain_ratio_r": -0.1}, {"omega": float("nan")}, {"omega0": 0.0},
    {"spot_size": 10.0}, {"n_guides": 12.5}, {"sigma_r": "2.1"},
])
def test_invalid_configs_rejected(bad):
    with pytest.raises(ConfigError):
        LatticeConfig(**bad)


def test_from_ratios_scales_by_kappa_and_omega0():
    cfg = LatticeConfig.from_ratios(2.1, 0.5, 3.0, kappa=0.14)
    assert cfg.sigma_r == pytest.approx(0.294)
    assert cfg.omega == pytest.approx(0.42)
    assert cfg.sigma_i_amp == pytest.approx(0.147)


def test_dict_round_trip_and_unknown_keys():
    cfg = LatticeConfig(gain_ratio_r=0.3, omega=1.2)
    assert LatticeConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        LatticeConfig.from_dict({"n_guide": 10})


def test_sigma_at_modulation():
    cfg = LatticeConfig(gain_ratio_r=0.5, omega=2.0)
    z = math.pi / 4
    assert sigma_at(cfg, z) == pytest.approx(2.1 + 1.05j)
    assert sigma_at(cfg, 0.0) == pytest.approx(2.1)


def test_hamiltonian_structure():
    h = tight_binding_hamiltonian(6, 0.7, 1.3 + 0.2j)
    assert np.allclose(np.diag(h), [1.3 + 0.2j, -1.3 - 0.2j] * 3)
    assert np.allclose(np.diag(h, 1), -0.7) and np.allclose(np.diag(h, -1), -0.7)
    assert np.count_nonzero(h) == 6 + 2 * 5


@given(st.integers(2, 20).map(lambda k: 2 * k),
       st.floats(0.1, 3), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 31))
def test_operator_matches_dense_hamiltonian(n, kappa, sr, si, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n) + 1j * rng.normal(size=n)
    sigma = complex(sr, si)
    parity = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    lhs = apply_lattice_operator(a, sigma, kappa, parity)
    rhs = -1j * tight_binding_hamiltonian(n, kappa, sigma) @ a
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_operator_batches_rows_independently():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(3, 8)) + 1j * rng.normal(size=(3, 8))
    sig = np.array([1.0, 2.0 + 0.5j, 0.3j])
    parity = np.where(np.arange(8) % 2 == 0, 1.0, -1.0)
    out = apply_lattice_operator(a, sig, 1.0, parity)
    for b in range(3):
        assert np.array_equal(out[b], apply_lattice_operator(a[b], sig[b], 1.0, parity))


def test_rhs_uses_state_z():
    cfg = LatticeConfig(n_guides=8, spot_size=20.0, gain_ratio_r=0.4, omega=1.0)
    a = np.arange(8) + 1j
    st_ = FieldState(0.7, a)
    expected = -1j * hamiltonian(cfg, 0.7) @ a
    assert np.allclose(coupled_mode_rhs(cfg, st_), expected)


def test_initial_field_is_bragg_tilted_gaussian():
    cfg = LatticeConfig()
    st_ = initial_gaussian_field(cfg)
    x = cfg.positions
    assert st_.z == 0.0
    assert np.abs(st_.amplitudes[cfg.n_guides // 2]) == pytest.approx(1.0)
    # quarter-turn phase step between neighbouring guides puts the beam at q = pi/(2a)
    ratio = st_.amplitudes[101] / st_.amplitudes[100]
    assert np.angle(ratio) == pytest.approx(math.pi / 2)
    # spot size is the 1/e half-width of the intensity
    w = cfg.spot_in_guides
    assert np.interp(w, x, st_.intensity) == pytest.approx(math.exp(-1), rel=0.02)


def test_initial_field_rejects_truncated_beam():
    with pytest.raises(ConfigError):
        initial_gaussian_field(LatticeConfig(n_guides=40))


def test_field_state_is_immutable_and_finite():
    s = FieldState(0.0, [1, 2j])
    with pytest.raises(ValueError):
        s.amplitudes[0] = 3
    with pytest.raises(ValueError):
        FieldState(0.0, [1, np.nan])
    with pytest.raises(ConfigError):
        s.check_against(LatticeConfig(n_guides=4, spacing_a=1.0, spot_size=2.0))
