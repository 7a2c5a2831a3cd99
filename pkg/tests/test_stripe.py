import warnings

import numpy as np
import pytest

from cpl.bloch import numerical_gap
from cpl.params import OmParams
from cpl.stripe import (channel_loss_estimate, default_k_grid, edge_profile_at,
                        extract_edge_states, find_k0, group_velocity,
                        reconstruct_vector, stripe_bands, stripe_hamiltonian,
                        zone_map)


def _p(dom=3.0, dth=1.5 * np.pi, **kw):
    return OmParams.from_detuning(dom, G=2.0, J=200.0, delta_theta=dth, **kw)


@pytest.fixture(scope="module")
def edge_channel():
    """Upper/lower in-gap profiles at the standard edge point (Ny=21)."""
    p = _p(3.0)
    gap = numerical_gap(p, grid_N=48).band_edges[1]
    table = stripe_bands(p, N_y=21)
    return p, gap, table, extract_edge_states(table, gap)


@pytest.fixture(scope="module")
def transfer_channel():
    """delta_om=4 channel with losses, as used by the transfer scenarios."""
    p = _p(4.0, Q_C=5e7, Q_M=1e6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gap = numerical_gap(p, grid_N=48).band_edges[1]
        table = stripe_bands(p, N_y=21)
        profs = extract_edge_states(table, gap)
    return p, gap, table, profs


def test_matrix_dimension_and_orbitals():
    sm = stripe_hamiltonian(_p(), 0.3, 21)
    assert sm.H.shape == (2 * (3 * 21 - 1),) * 2
    assert len(sm.orbitals) == 3 * 21 - 1
    assert (0, 0) not in sm.orbitals          # trimmed A of the outer row
    assert (0, 1) in sm.orbitals


def test_matrix_hermitian_when_lossless():
    for kx in (-1.2, 0.0, 0.7, np.pi / 2):
        H = stripe_hamiltonian(_p(), kx, 15).H
        assert np.allclose(H, H.conj().T, atol=1e-13)


def test_default_k_grid_half_zone():
    ks = default_k_grid(101)
    assert len(ks) == 101
    assert ks.min() > -np.pi / 2
    assert ks.max() == pytest.approx(np.pi / 2)


def test_zone_map_range():
    raw = default_k_grid(51)
    kz = zone_map(raw)
    assert np.all(kz > 0) and np.all(kz <= np.pi)
    # direct points unchanged, wrapped points shifted by pi
    assert zone_map(0.3) == pytest.approx(0.3)
    assert zone_map(-0.3) == pytest.approx(np.pi - 0.3)


def test_one_branch_per_edge(edge_channel):
    _, _, _, profs = edge_channel
    for side in ("upper", "lower"):
        ks = [q.k_x for q in profs if q.side == side]
        assert len(ks) > 30
        assert len(set(np.round(ks, 12))) == len(ks)   # one state per momentum


def test_upper_branch_window_and_velocity(edge_channel):
    _, _, _, profs = edge_channel
    up = [q for q in profs if q.side == "upper"]
    ks = np.array([q.k_x for q in up])
    vg = np.array([q.v_g for q in up])
    assert ks.min() > np.pi / 2 and ks.max() <= np.pi
    assert np.all(vg > 0)
    lo = [q for q in profs if q.side == "lower"]
    assert np.all(np.array([q.v_g for q in lo]) < 0)


def test_outer_a_amplitude_vanishes(edge_channel):
    _, _, _, profs = edge_channel
    assert max(abs(q.u[0]) for q in profs if q.side == "upper") < 1e-6


def test_velocity_sign_flips_with_phase_pattern():
    p = _p(3.0, dth=-1.5 * np.pi)
    gap = numerical_gap(p, grid_N=48).band_edges[1]
    table = stripe_bands(p, N_y=21, k_grid=default_k_grid(101))
    up = [q for q in extract_edge_states(table, gap) if q.side == "upper"]
    assert len(up) > 5
    assert np.all(np.array([q.v_g for q in up]) < 0)


def test_bulk_depth_insensitivity():
    # deepening the ribbon moves the bulk bands but not the edge branch
    p = _p(3.0)
    gap = numerical_gap(p, grid_N=48).band_edges[1]
    ks = default_k_grid(81)
    branches = []
    for Ny in (21, 41):
        table = stripe_bands(p, N_y=Ny, k_grid=ks)
        branches.append({round(q.k_x, 9): q.omega_E
                         for q in extract_edge_states(table, gap)
                         if q.side == "upper"})
    common = set(branches[0]) & set(branches[1])
    assert len(common) >= 8
    dev = max(abs(branches[0][k] - branches[1][k]) for k in common)
    assert dev < 1e-6


def test_midgap_channel_frozen_values(transfer_channel):
    p, _, _, profs = transfer_channel
    up = [q for q in profs if q.side == "upper"]
    k0 = find_k0(up, mode="resonance", omega_0=p.omega_M + 0.60, p=p, N_y=21)
    q0 = edge_profile_at(p, 21, k0, omega_near=p.omega_M + 0.60)
    assert k0 / np.pi == pytest.approx(0.637154, abs=2e-4)
    assert q0.omega_E == pytest.approx(p.omega_M + 0.60, abs=1e-6)
    assert abs(q0.u[2]) == pytest.approx(0.540818, rel=1e-3)
    assert abs(q0.u[1]) == pytest.approx(abs(q0.u[2]), rel=1e-4)  # B/C symmetric here
    assert q0.v_g == pytest.approx(1.55974, rel=1e-3)
    assert q0.xi == pytest.approx(2.2283, rel=1e-2)
    assert q0.P_opt == pytest.approx(0.012595, rel=1e-2)
    assert q0.optical_weight == pytest.approx(0.039501, rel=1e-2)
    assert q0.kappa_E_total == pytest.approx(
        (1 - q0.optical_weight) * p.kappa_M + q0.optical_weight * p.kappa_C)


def test_resonance_mode_hits_target(transfer_channel):
    p, _, _, profs = transfer_channel
    up = [q for q in profs if q.side == "upper"]
    for target in (0.45, 0.60, 0.80):
        k0 = find_k0(up, mode="resonance", omega_0=p.omega_M + target,
                     p=p, N_y=21)
        q0 = edge_profile_at(p, 21, k0, omega_near=p.omega_M + target)
        assert abs(q0.omega_E - p.omega_M - target) < 1e-6


def test_resonance_outside_branch_rejected(transfer_channel):
    p, _, _, profs = transfer_channel
    up = [q for q in profs if q.side == "upper"]
    with pytest.raises(ValueError, match="outside"):
        find_k0(up, mode="resonance", omega_0=p.omega_M + 2.5, p=p, N_y=21)


def test_find_k0_modes_agree(transfer_channel):
    # resonance mode targeting a grid state's energy must land on its momentum
    p, _, table, profs = transfer_channel
    up = sorted((q for q in profs if q.side == "upper"), key=lambda q: q.k_x)
    mid = up[len(up) // 2]
    k_res = find_k0(up, mode="resonance", omega_0=mid.omega_E, p=p, N_y=21)
    assert abs(k_res - mid.k_x) < 1e-5
    k_ma = find_k0(up, mode="max-amplitude")
    assert any(q.k_x == k_ma for q in up)   # grid momentum of a branch state


def test_find_k0_validation(transfer_channel):
    _, _, _, profs = transfer_channel
    up = [q for q in profs if q.side == "upper"]
    with pytest.raises(ValueError, match="no edge-state"):
        find_k0([])
    with pytest.raises(ValueError, match="mode"):
        find_k0(up, mode="nearest")
    with pytest.raises(ValueError, match="needs"):
        find_k0(up, mode="resonance", omega_0=460.6)


def test_kappa_bounds(transfer_channel):
    # both decay estimates are convex combinations of kappa_M and kappa_C
    p, _, _, profs = transfer_channel
    for q in profs:
        for kap in (q.kappa_E, q.kappa_E_total):
            assert p.kappa_M <= kap <= p.kappa_C
        assert q.kappa_E_total > p.kappa_M


def test_group_velocity_helper_warns_when_short():
    with pytest.warns(UserWarning, match="fewer than 3"):
        group_velocity(np.array([1.0, 2.0]), np.array([0.1, 0.2]))
    k = np.linspace(0, 1, 9)
    vg = group_velocity(2.0 * k, k)
    assert vg == pytest.approx(np.full(9, 2.0))


def test_reconstruction_overlap(transfer_channel):
    p, _, table, profs = transfer_channel
    up = [q for q in profs if q.side == "upper"]
    q0 = min(up, key=lambda q: abs(q.omega_E - p.omega_M - 0.60))
    vec = reconstruct_vector(q0, table.orbitals, 21)
    assert np.linalg.norm(vec) == pytest.approx(1.0)
    ik = int(np.argmin(np.abs(zone_map(table.k_x) - q0.k_x)))
    b = int(np.argmin(np.abs(table.energies[ik] - q0.omega_E)))
    exact = table.vectors[ik][:, b]
    assert abs(np.vdot(vec, exact)) > 0.95


@pytest.mark.xfail(reason="single-pattern exponential envelope tops out near "
                          "0.97 overlap here: the intra-cell amplitude pattern "
                          "rotates with depth, so no (u, xi, phi) ansatz reaches "
                          "0.99", strict=True)
def test_reconstruction_overlap_99(transfer_channel):
    p, _, table, profs = transfer_channel
    up = [q for q in profs if q.side == "upper"]
    q0 = min(up, key=lambda q: abs(q.omega_E - p.omega_M - 0.60))
    assert q0.xi < 3.0
    vec = reconstruct_vector(q0, table.orbitals, 21)
    ik = int(np.argmin(np.abs(zone_map(table.k_x) - q0.k_x)))
    b = int(np.argmin(np.abs(table.energies[ik] - q0.omega_E)))
    assert abs(np.vdot(vec, table.vectors[ik][:, b])) > 0.99


def test_channel_loss_estimate_formula(transfer_channel):
    p, _, _, profs = transfer_channel
    q0 = next(q for q in profs if q.side == "upper")
    est = channel_loss_estimate(q0, n_sites=8, kappa_C=p.kappa_C)
    assert est == pytest.approx(8 * q0.optical_weight * p.kappa_C / q0.v_g)


def test_optical_fraction_decreases_with_detuning():
    med = []
    for dom in (3.0, 8.0, 20.0):
        p = _p(dom)
        gap = numerical_gap(p, grid_N=48).band_edges[1]
        table = stripe_bands(p, N_y=21, k_grid=default_k_grid(101))
        up = [q for q in extract_edge_states(table, gap) if q.side == "upper"]
        med.append(np.median([q.P_opt for q in up]))
        assert all(0 < q.P_opt < 1 for q in up)
    assert med[0] > med[1] > med[2]


def test_narrow_ribbon_warns():
    with pytest.warns(UserWarning, match="N_y"):
        stripe_hamiltonian(_p(), 0.2, 6)
