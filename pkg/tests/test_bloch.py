import numpy as np
import pytest

from cpl.bloch import (GAMMA, K_POINT, KPRIME_POINT, M_POINT, analytic_gap,
                       band_structure, bloch_hamiltonian, chern_numbers,
                       critical_coupling, high_symmetry_path, kpath,
                       kpoint_effective_gap, mpoint_effective_levels,
                       numerical_gap)
from cpl.params import OmParams


def _random_ks(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-np.pi, np.pi, size=(n, 2))


def test_bloch_matrix_hermitian(p_std):
    for k in _random_ks(20):
        H = bloch_hamiltonian(p_std, k)
        assert np.allclose(H, H.conj().T, atol=1e-14)


def test_gamma_point_closed_form():
    # G = 0 decouples the sectors; each Kagome block at Gamma has
    # eigenvalues onsite + hop * {-2, -2, 4}
    p = OmParams.from_detuning(3.0, G=1e-12, J=200.0)
    w = np.linalg.eigvalsh(bloch_hamiltonian(p, GAMMA))
    wm = p.omega_M
    wo = -p.Delta
    expected = sorted([wm - 2, wm - 2, wm + 4, wo - 400, wo - 400, wo + 800])
    assert w == pytest.approx(expected, abs=1e-6)


def test_mechanical_flat_band_without_coupling():
    p = OmParams.from_detuning(3.0, G=1e-12, J=200.0)
    ks = _random_ks(40, seed=3)
    w = np.linalg.eigvalsh(np.stack([bloch_hamiltonian(p, k) for k in ks]))
    # positive-hopping Kagome: the flat band is the lowest, at omega_M - 2K
    assert w[:, 0] == pytest.approx(np.full(40, p.omega_M - 2.0), abs=1e-6)


def test_band_structure_runs_along_path(p_std):
    ks, labels = high_symmetry_path(40)
    bs = band_structure(p_std, ks, labels)
    assert bs.energies.shape == (len(ks), 6)
    assert np.all(np.diff(bs.energies, axis=1) >= -1e-12)
    assert bs.phonon_weight.min() >= 0 and bs.phonon_weight.max() <= 1 + 1e-12
    # eigenvector completeness: phonon weight sums to 3 per k
    assert bs.phonon_weight.sum(axis=1) == pytest.approx(np.full(len(ks), 3.0))
    assert bs.labels[0][1] == "Gamma" and bs.labels[-1][1] == "Gamma"


def test_kpath_endpoints():
    ks, labels = kpath([GAMMA, K_POINT, M_POINT], ["Gamma", "K", "M1"], 25)
    assert ks[0] == pytest.approx(GAMMA)
    assert ks[-1] == pytest.approx(M_POINT)
    idx = dict((name, i) for i, name in labels)
    assert ks[idx["K"]] == pytest.approx(K_POINT)


def test_chern_standard_point(p_std):
    reps = chern_numbers(p_std, grid_N=24)
    assert [r.chern for r in reps] == [1, 0, -1, -1, 0, 1]
    assert sum(r.chern for r in reps) == 0
    assert max(r.curvature_sum_residual for r in reps) < 1e-6


def test_chern_grid_independent(p_std):
    c24 = [r.chern for r in chern_numbers(p_std, grid_N=24)]
    c30 = [r.chern for r in chern_numbers(p_std, grid_N=30)]
    c48 = [r.chern for r in chern_numbers(p_std, grid_N=48)]
    assert c24 == c30 == c48


def test_chern_sign_flips_with_phase_pattern(p_std):
    pm = p_std.replace(delta_theta=-p_std.delta_theta)
    cp = [r.chern for r in chern_numbers(p_std, grid_N=24)]
    cm = [r.chern for r in chern_numbers(pm, grid_N=24)]
    assert cm == [-c for c in cp]


def test_chern_degenerate_bands_rejected():
    # without optomechanical coupling the Kagome Dirac points touch
    p = OmParams.from_detuning(3.0, G=1e-15, J=200.0)
    with pytest.raises(ValueError, match="degenerate"):
        chern_numbers(p, grid_N=24)


def test_numerical_gap_frozen_values():
    # dense-grid gap_23 for the canonical parameter table (grid_N = 48)
    table = {
        (2 * np.pi / 3, 3.0): 0.993367,
        (2 * np.pi / 3, 4.0): 0.821805,
        (2 * np.pi / 3, 20.0): 0.191587,
        (1.5 * np.pi, 3.0): 0.610465,
        (1.5 * np.pi, 4.0): 0.611440,
        (1.5 * np.pi, 20.0): 0.169221,
    }
    for (dth, dom), expected in table.items():
        p = OmParams.from_detuning(dom, G=2.0, J=200.0, delta_theta=dth)
        rep = numerical_gap(p, grid_N=48)
        assert rep.gap_23 == pytest.approx(expected, abs=2e-6), (dth, dom)
        assert not rep.closed_23
        lo, hi = rep.band_edges[1]
        assert hi - lo == pytest.approx(rep.gap_23)


def test_small_gap_12_against_induced_hopping(p_std):
    # the 1-2 gap is a weak splitting of the lower Kagome bands; it exists
    # at the standard point and vanishes for the 3pi/2 pattern
    rep = numerical_gap(p_std, grid_N=48)
    assert 0 < rep.gap_12 < 0.01
    p_edge = p_std.replace(delta_theta=1.5 * np.pi)
    rep2 = numerical_gap(p_edge, grid_N=48)
    assert rep2.gap_12 == 0.0 and rep2.closed_12


def test_analytic_gap_equals_two_mode_value():
    for dom, G in [(3.0, 2.0), (4.0, 2.0), (20.0, 2.0), (8.0, 1.0)]:
        p = OmParams.from_detuning(dom, G=G, J=200.0)
        eps, above = analytic_gap(p)
        assert eps == min(kpoint_effective_gap(p), p.K)   # exact, same arithmetic
        assert above == (G > np.sqrt(1.5 * dom))
    # closed forms of the two-mode matrix
    p4 = OmParams.from_detuning(4.0, G=2.0, J=200.0)
    assert kpoint_effective_gap(p4) == pytest.approx(2 * (np.sqrt(2) - 1))
    p3 = OmParams.from_detuning(3.0, G=2.0, J=200.0)
    assert kpoint_effective_gap(p3) == pytest.approx(1.0)


def test_analytic_gap_rejects_nonpositive_detuning():
    p = OmParams(G=2.0, Delta=-860.0)   # delta_om = -1
    assert p.delta_om < 0
    with pytest.raises(ValueError, match="delta_om"):
        analytic_gap(p)


def test_mpoint_levels_decouple_at_zero_coupling(p_std):
    ev = mpoint_effective_levels(p_std, G=0.0)
    assert ev == pytest.approx([-3.0, 0.0, 3.0])


def test_critical_coupling_closed_forms(p_std):
    cc = critical_coupling(p_std)
    assert cc.G_c_analytic == np.sqrt(1.5 * 3.0)    # exact closed form
    assert cc.G_min == np.sqrt(1.0 + 3.0)
    # the full-model optimum lands within a few percent of the closed form
    assert abs(cc.G_c_numeric - cc.G_c_analytic) / cc.G_c_analytic < 0.05


def test_gap_maximized_near_critical_coupling(p_std):
    # gap(G) should be larger at G_c than well above or below it
    g_at = {}
    for G in (1.0, np.sqrt(4.5), 4.0):
        g_at[G] = numerical_gap(p_std.replace(G=G), grid_N=24).gap_23
    assert g_at[np.sqrt(4.5)] > g_at[1.0]
    assert g_at[np.sqrt(4.5)] > g_at[4.0]
