import numpy as np
import pytest

from cpl.formulas import (check_stability, compute_flux,
                          effective_spin_coupling, flux_from_hopping_phases,
                          optical_induced_hopping)
from cpl.params import OmParams, SpinDriveParams


def _params_at_resonance_distance(res, delta_theta=2 * np.pi / 3, G=2.0):
    """OmParams with a chosen omega_M + Delta = res."""
    return OmParams(G=G, Delta=res - 460.0, omega_M=460.0, J=200.0,
                    delta_theta=delta_theta)


def test_flux_strong_hybridization_point():
    # J G^2 = 800, 2 K (Delta+omega_M)^2 = 3200: arctan argument sqrt(3)*800/-2400
    p = _params_at_resonance_distance(-40.0)
    assert compute_flux(p) == pytest.approx(-np.pi / 2)


def test_flux_sign_follows_phase_pattern():
    p = _params_at_resonance_distance(-40.0, delta_theta=-2 * np.pi / 3)
    assert compute_flux(p) == pytest.approx(np.pi / 2)


def test_flux_matches_bond_phase_accumulation():
    rng = np.random.default_rng(7)
    for _ in range(25):
        res = -rng.uniform(20.0, 800.0)
        dth = rng.uniform(-np.pi, np.pi)
        p = _params_at_resonance_distance(res, delta_theta=dth,
                                          G=rng.uniform(0.5, 4.0))
        assert compute_flux(p) == pytest.approx(
            flux_from_hopping_phases(p), abs=1e-12)


def test_flux_singular_denominator():
    # J G^2 = 2 K (Delta+omega_M)^2  ->  +-3pi/2 limit
    res = -np.sqrt(200.0 * 4.0 / 2.0)
    p = _params_at_resonance_distance(res)
    assert compute_flux(p) == pytest.approx(1.5 * np.pi)


def test_induced_hopping_value():
    p = OmParams.from_detuning(3.0, G=2.0, J=200.0)
    hop = optical_induced_hopping(p)
    res = p.omega_M + p.Delta          # -(delta_om + 2J + K) = -403
    assert res == pytest.approx(-403.0)
    assert abs(hop.value) == pytest.approx(4.0 * 200.0 / 403.0 ** 2)
    assert np.angle(hop.value) == pytest.approx(p.delta_theta)
    assert hop.validity_ratio == pytest.approx(200.0 / 403.0)


def test_induced_hopping_resonance_raises():
    p = _params_at_resonance_distance(-1.0).replace(Delta=-460.0)
    with pytest.raises(ValueError, match="resonant"):
        optical_induced_hopping(p)


def test_stability_threshold():
    p = OmParams.from_detuning(4.0, G=2.0, Q_C=5e6, Q_M=1e6)
    rep = check_stability(p)
    delta_K = 4.0 + 920.0
    assert rep.required_kappa_M == pytest.approx(p.kappa_C * 4.0 / delta_K ** 2)
    assert rep.stable
    assert rep.margin_ratio == pytest.approx(p.kappa_M / rep.required_kappa_M)

    weak = p.replace(kappa_M=0.5 * rep.required_kappa_M)
    assert not check_stability(weak).stable


def test_stability_margin_infinite_without_optical_loss():
    p = OmParams.from_detuning(4.0, G=2.0)
    rep = check_stability(p)
    assert rep.required_kappa_M == 0.0
    assert np.isinf(rep.margin_ratio)
    assert rep.stable


def test_stability_outside_rotating_wave():
    p = OmParams.from_detuning(4.0, G=2.0).replace(omega_M=1.0, Delta=-300.0)
    # delta_K = delta_om + 2 omega_M <= 0 now
    assert p.delta_om + 2 * p.omega_M <= 0
    with pytest.raises(ValueError, match="delta_K"):
        check_stability(p)


def test_spin_coupling():
    s = SpinDriveParams(g_s=0.2, Omega=3.0, delta_drive=10.0,
                        omega_d=450.0, omega_B=10.6)
    c = effective_spin_coupling(s)
    assert c.g_sp == pytest.approx(0.06)
    assert c.omega_0 == pytest.approx(460.6)


def test_spin_coupling_zero_detuning():
    with pytest.warns(UserWarning, match="adiabatic"):
        s = SpinDriveParams(g_s=0.2, Omega=3.0, delta_drive=0.0)
    with pytest.raises(ZeroDivisionError):
        effective_spin_coupling(s)
