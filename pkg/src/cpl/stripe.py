"""Stripe (semi-infinite ribbon) diagonalization and chiral edge-state data.

The stripe is periodic along x (cell length 2a, quasi-momentum k_x in
(-pi/2a, pi/2a]) and N_y cells deep along R1, with the A site of the top
row (m = 0) removed.  The single-particle matrix is 2(3 N_y - 1)
dimensional: phonons then photons, cells m = 0 .. N_y-1, basis s within
each cell.

Edge-state quantities are reported against the momentum zone (0, pi/a]
used for dispersions along the physical edge direction: the matrix is
pi/a-periodic in k_x, and raw momenta <= 0 are shifted by +pi/a.  For the
standard phase pattern delta_theta = 3pi/2 the upper-edge branch then
crosses the gap inside (pi/2a, pi/a] with positive group velocity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .params import OmParams

_EDGE_FIT_CELLS = 6          # xi fitted on cells m = 0..5 only
_WINDOW_SHRINK = 0.02        # in-gap window shrunk 2% per side


@dataclass(frozen=True)
class StripeMatrix:
    k_x: float
    N_y: int
    H: np.ndarray
    orbitals: tuple          # (s, m) per orbital, one field sector


@dataclass(frozen=True)
class DispersionTable:
    k_x: np.ndarray          # raw momenta in (-pi/2a, pi/2a]
    N_y: int
    energies: np.ndarray     # (nk, dim) ascending
    phonon_weight: np.ndarray
    loc_center: np.ndarray   # amplitude-weighted mean cell row
    vectors: np.ndarray | None
    orbitals: tuple
    params: OmParams


@dataclass(frozen=True)
class EdgeStateProfile:
    k_x: float               # zone-mapped, in (0, pi/a]
    omega_E: float           # absolute energy (units of K)
    side: str                # 'upper' | 'lower'
    u: np.ndarray            # (u_A, u_B, u_C) outer-cell mechanical amplitudes
    v: np.ndarray            # (v_A, v_B, v_C) outer-cell optical amplitudes
    xi: float                # penetration depth (units of a)
    phi: np.ndarray          # per-cell phases, phi[0] = 0 gauge
    P_opt: float             # optical fraction of the exponential edge profile
    optical_weight: float    # exact photonic weight of the full eigenvector
    v_g: float               # group velocity (units of K a)
    kappa_E: float           # channel decay from the profile amplitudes
    kappa_E_total: float     # channel decay from the exact optical weight
    fit_residual: float


def stripe_hamiltonian(p: OmParams, k_x: float, N_y: int) -> StripeMatrix:
    """Bloch matrix of the stripe at momentum k_x.

    The B-C bond within a row carries (1 + e^{-2 i k_x a}); the A-B bond
    wrapping the cell boundary carries e^{2 i k_x a}.  Warns for N_y < 8
    where the two edges hybridize noticeably.
    """
    if N_y < 8:
        warnings.warn(f"N_y = {N_y} < 8: opposite edges of the stripe hybridize")
    a = 1.0
    orbs = [(s, m) for m in range(N_y) for s in range(3) if not (m == 0 and s == 0)]
    idx = {o: i for i, o in enumerate(orbs)}
    nb = len(orbs)
    H = np.zeros((2 * nb, 2 * nb), dtype=complex)
    ph = np.exp(2j * k_x * a)

    for sec, (hop, onsite) in enumerate(
            [(p.K, p.omega_M - 0.5j * p.kappa_M),
             (p.J, -p.Delta - 0.5j * p.kappa_C)]):
        off = sec * nb
        for o in orbs:
            H[off + idx[o], off + idx[o]] = onsite
        for m in range(N_y):
            i, j = off + idx[(1, m)], off + idx[(2, m)]
            amp = hop * (1.0 + np.conj(ph))
            H[i, j] += amp
            H[j, i] += np.conj(amp)
            if m >= 1:
                iA = off + idx[(0, m)]
                for (s2, m2, amp) in [(1, m - 1, hop * ph), (1, m, hop),
                                      (2, m, hop), (2, m - 1, hop)]:
                    jj = off + idx[(s2, m2)]
                    H[iA, jj] += amp
                    H[jj, iA] += np.conj(amp)

    theta = p.delta_theta * np.arange(3)
    for o in orbs:
        c = p.G * np.exp(1j * theta[o[0]])
        H[nb + idx[o], idx[o]] = c
        H[idx[o], nb + idx[o]] = np.conj(c)
    return StripeMatrix(k_x=k_x, N_y=N_y, H=H, orbitals=tuple(orbs))


def default_k_grid(n: int = 401) -> np.ndarray:
    """n uniform momenta spanning (-pi/2a, pi/2a]."""
    return (np.arange(1, n + 1) / n - 0.5) * np.pi


def stripe_bands(p: OmParams, N_y: int, k_grid=None,
                 keep_vectors: bool = True) -> DispersionTable:
    """Hermitian ribbon spectrum on the raw momentum grid.

    Diagonalization drops kappa_C/kappa_M (with a warning); the original
    rates stay attached to the table for edge-state decay bookkeeping.
    """
    p_h = p
    if p.kappa_C != 0.0 or p.kappa_M != 0.0:
        warnings.warn("stripe spectra ignore kappa_C/kappa_M (Hermitian "
                      "solver); rates still enter the edge-state kappa_E")
        p_h = p.replace(kappa_C=0.0, kappa_M=0.0)
    ks = default_k_grid() if k_grid is None else np.asarray(k_grid, dtype=float)
    energies, pw, loc, vecs = [], [], [], []
    orbs = None
    rows = None
    for kx in ks:
        sm = stripe_hamiltonian(p_h, kx, N_y)
        if orbs is None:
            orbs = sm.orbitals
            rows = np.array([m for (_, m) in orbs])
        w, v = np.linalg.eigh(sm.H)
        nb = len(orbs)
        wmech = np.abs(v[:nb, :]) ** 2
        wopt = np.abs(v[nb:, :]) ** 2
        cellw = wmech + wopt
        energies.append(w)
        pw.append(wmech.sum(axis=0))
        loc.append((rows[:, None] * cellw).sum(axis=0) / cellw.sum(axis=0))
        if keep_vectors:
            vecs.append(v)
    return DispersionTable(k_x=ks, N_y=N_y, energies=np.array(energies),
                           phonon_weight=np.array(pw), loc_center=np.array(loc),
                           vectors=np.array(vecs) if keep_vectors else None,
                           orbitals=orbs, params=p)


def zone_map(k_raw) -> np.ndarray:
    """Map raw momenta in (-pi/2a, pi/2a] to the edge zone (0, pi/a]."""
    k = np.asarray(k_raw, dtype=float)
    return np.where(k <= 0.0, k + np.pi, k)


def _profile_from_vector(vec: np.ndarray, orbs, N_y: int, k_z: float,
                         omega: float, p: OmParams, side: str) -> EdgeStateProfile:
    nb = len(orbs)
    rows = np.array([m for (_, m) in orbs])
    # mirror the row index for lower-edge states so m=0 is always the outer cell
    mm = rows if side == "upper" else (N_y - 1 - rows)
    cellw = np.zeros(N_y)
    np.add.at(cellw, mm, np.abs(vec[:nb]) ** 2 + np.abs(vec[nb:]) ** 2)

    # fit cells 1.., not 0: the outermost row lacks the trimmed sublattice,
    # which kinks the envelope right at the boundary
    nfit = min(1 + _EDGE_FIT_CELLS, N_y)
    x = np.arange(1, nfit)
    y = np.log(np.maximum(cellw[1:nfit], 1e-300))
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((np.polyval([slope, icpt], x) - y) ** 2)))
    if resid > 0.05:
        warnings.warn(f"edge profile not exponential (fit residual {resid:.3f})")
    xi = -2.0 / slope if slope < 0 else np.inf

    # outer-cell amplitudes; gauge: mechanical B amplitude of the outer cell
    # real positive.  Normalize so sum_{s,m} (|u|^2+|v|^2) e^{-2m/xi} = 1.
    u = np.zeros(3, complex)
    v3 = np.zeros(3, complex)
    for q, (s, m) in enumerate(orbs):
        if (m if side == "upper" else N_y - 1 - m) == 0:
            u[s] = vec[q]
            v3[s] = vec[nb + q]
    gauge = u[1] / abs(u[1]) if abs(u[1]) > 0 else 1.0
    u = u / gauge
    v3 = v3 / gauge
    geom = 1.0 - np.exp(-2.0 / xi)
    slice_norm = (np.abs(u) ** 2 + np.abs(v3) ** 2).sum()
    scale = np.sqrt(geom / slice_norm)
    u = u * scale
    v3 = v3 * scale

    # per-cell phase of the dominant mechanical amplitude, relative to m=0
    iB = {m: None for m in range(N_y)}
    for q, (s, m) in enumerate(orbs):
        if s == 1:
            iB[m if side == "upper" else N_y - 1 - m] = q
    phi = np.zeros(N_y)
    ref = None
    for m in range(N_y):
        q = iB[m]
        if q is None:
            continue
        if ref is None:
            ref = vec[q] / gauge
        phi[m] = np.angle((vec[q] / gauge) * np.conj(ref))

    P_opt = float((np.abs(v3) ** 2).sum() / geom)
    w_opt = float((np.abs(vec[nb:]) ** 2).sum() / (np.abs(vec) ** 2).sum())
    kappa_E = float((np.abs(u) ** 2).sum() / geom * p.kappa_M + P_opt * p.kappa_C)
    kappa_E_tot = float((1.0 - w_opt) * p.kappa_M + w_opt * p.kappa_C)
    return EdgeStateProfile(k_x=float(k_z), omega_E=float(omega), side=side,
                            u=u, v=v3, xi=float(xi), phi=phi, P_opt=P_opt,
                            optical_weight=w_opt, v_g=np.nan, kappa_E=kappa_E,
                            kappa_E_total=kappa_E_tot, fit_residual=resid)


def extract_edge_states(table: DispersionTable,
                        gap_window: tuple) -> list[EdgeStateProfile]:
    """Edge-state profiles for every in-gap eigenvector of the table.

    ``gap_window`` is the absolute (low, high) bulk gap; it is shrunk by
    2% per side to avoid grazing bulk states.  Group velocities are filled
    in by central differences along each side's branch.  Returns an empty
    list when nothing lies in the window.
    """
    if table.vectors is None:
        raise ValueError("dispersion table was built with keep_vectors=False")
    lo, hi = gap_window
    width = hi - lo
    lo += _WINDOW_SHRINK * width
    hi -= _WINDOW_SHRINK * width
    p = table.params
    N_y = table.N_y
    profiles = []
    for ik, kx in enumerate(table.k_x):
        w = table.energies[ik]
        for b in np.nonzero((w > lo) & (w < hi))[0]:
            side = "upper" if table.loc_center[ik, b] < N_y / 2 else "lower"
            kz = zone_map(kx) if side == "upper" else float(kx)
            prof = _profile_from_vector(table.vectors[ik][:, b], table.orbitals,
                                        N_y, kz, w[b], p, side)
            profiles.append(prof)

    # group velocity along each branch (sorted in its own momentum variable)
    out = []
    for side in ("upper", "lower"):
        branch = [q for q in profiles if q.side == side]
        branch.sort(key=lambda q: q.k_x)
        if len(branch) >= 3:
            kzs = np.array([q.k_x for q in branch])
            es = np.array([q.omega_E for q in branch])
            vg = np.gradient(es, kzs)
            for q, g in zip(branch, vg):
                object.__setattr__(q, "v_g", float(g))
        out.extend(branch)
    return out


def group_velocity(omega_E: np.ndarray, k_x: np.ndarray) -> np.ndarray:
    """Central-difference d omega_E / d k_x; one-sided (with a warning) at
    the window boundaries."""
    omega_E = np.asarray(omega_E, float)
    k_x = np.asarray(k_x, float)
    if len(k_x) < 3:
        warnings.warn("fewer than 3 momenta: one-sided differences only")
    return np.gradient(omega_E, k_x)


def find_k0(profiles: list, mode: str = "max-amplitude",
            omega_0: float | None = None, p: OmParams | None = None,
            N_y: int | None = None, tol: float = 1e-6) -> float:
    """Working momentum k_0 on an edge branch.

    'max-amplitude': argmax over the branch of the outer-site mechanical
    amplitude (the largest of |u_B|, |u_C| overall fixes which site counts).
    'resonance': solve omega_E(k) = omega_0 by bisection on the monotone
    branch to |omega_E - omega_0| < tol; needs ``p`` and ``N_y`` to
    rediagonalize, and raises when omega_0 is outside the branch range.
    Use edge_profile_at to rebuild the channel data at the returned k_0.
    """
    if not profiles:
        raise ValueError("no edge-state profiles supplied")
    branch = sorted(profiles, key=lambda q: q.k_x)
    if mode == "max-amplitude":
        s0 = 1 + int(max(np.abs(q.u[2]).max() for q in branch) >=
                     max(np.abs(q.u[1]).max() for q in branch))
        i = int(np.argmax([abs(q.u[s0]) for q in branch]))
        return float(branch[i].k_x)
    if mode != "resonance":
        raise ValueError(f"unknown mode {mode!r}")
    if omega_0 is None or p is None or N_y is None:
        raise ValueError("resonance mode needs omega_0, p and N_y")
    es = np.array([q.omega_E for q in branch])
    if not (es.min() <= omega_0 <= es.max()):
        raise ValueError(
            f"omega_0 = {omega_0} outside the edge branch "
            f"[{es.min():.4f}, {es.max():.4f}]")
    lo_gap = min(q.omega_E for q in branch) - 0.5
    hi_gap = max(q.omega_E for q in branch) + 0.5

    p_h = p.replace(kappa_C=0.0, kappa_M=0.0)

    def omega_at(kz):
        k_raw = kz - np.pi if kz > np.pi / 2 else kz
        w = np.linalg.eigvalsh(stripe_hamiltonian(p_h, k_raw, N_y).H)
        cand = w[(w > lo_gap) & (w < hi_gap)]
        # nearest in-window eigenvalue tracks the branch
        return cand[np.argmin(np.abs(cand - omega_0))]

    i = int(np.searchsorted(es, omega_0)) if es[0] < es[-1] else \
        len(es) - int(np.searchsorted(es[::-1], omega_0))
    i = np.clip(i, 1, len(branch) - 1)
    ka, kb = branch[i - 1].k_x, branch[i].k_x
    fa = omega_at(ka) - omega_0
    if abs(fa) < tol:           # root sits on the bracket edge
        return float(ka)
    for _ in range(80):
        km = 0.5 * (ka + kb)
        fm = omega_at(km) - omega_0
        if abs(fm) < tol:
            break
        if fa * fm <= 0:
            kb = km
        else:
            ka, fa = km, fm
    else:
        raise RuntimeError("bisection failed to converge")
    return float(km)


def edge_profile_at(p: OmParams, N_y: int, k_zone: float,
                    omega_near: float, dk: float = 1e-4) -> EdgeStateProfile:
    """Edge-state profile at an arbitrary momentum (no grid involved).

    Diagonalizes the (lossless) ribbon at ``k_zone``, takes the eigenstate
    nearest ``omega_near``, and fills v_g by a central difference tracking
    that eigenvalue at k_zone +- dk.  Damping-rate fields still reflect the
    kappa values of ``p``.
    """
    p_h = p.replace(kappa_C=0.0, kappa_M=0.0)

    def solve(kz):
        k_raw = kz - np.pi if kz > np.pi / 2 else kz
        sm = stripe_hamiltonian(p_h, k_raw, N_y)
        w, v = np.linalg.eigh(sm.H)
        b = int(np.argmin(np.abs(w - omega_near)))
        return sm, w, v, b

    sm, w, v, b = solve(k_zone)
    rows = np.array([m for (_, m) in sm.orbitals])
    weight = np.abs(v[:len(rows), b]) ** 2 + np.abs(v[len(rows):, b]) ** 2
    side = "upper" if (weight @ rows) / weight.sum() < N_y / 2 else "lower"
    prof = _profile_from_vector(v[:, b], sm.orbitals, N_y, float(k_zone),
                                w[b], p, side)
    _, wp, _, bp = solve(k_zone + dk)
    _, wm, _, bm = solve(k_zone - dk)
    object.__setattr__(prof, "v_g", float((wp[bp] - wm[bm]) / (2 * dk)))
    return prof


def reconstruct_vector(profile: EdgeStateProfile, orbitals, N_y: int) -> np.ndarray:
    """Rebuild the eigenvector from (u, v, xi, phi).

    Single-pattern exponential ansatz: overlap with the exact vector is
    typically 0.95-0.99 for xi < 3a.  It cannot be pushed arbitrarily close
    to 1 because the intra-cell amplitude pattern rotates with depth (the
    edge state superposes evanescent solutions with different patterns).
    """
    nb = len(orbitals)
    vec = np.zeros(2 * nb, complex)
    for q, (s, m) in enumerate(orbitals):
        mm = m if profile.side == "upper" else N_y - 1 - m
        env = np.exp(-mm / profile.xi) * np.exp(1j * profile.phi[mm])
        vec[q] = profile.u[s] * env
        vec[nb + q] = profile.v[s] * env
    n = np.linalg.norm(vec)
    return vec / n if n > 0 else vec


def channel_loss_estimate(profile: EdgeStateProfile, n_sites: int,
                          kappa_C: float) -> float:
    """Short-time in-flight loss over n_sites edge sites,
    n_sites * w_opt * kappa_C * a / v_g.

    Uses the exact photonic weight of the edge eigenvector: the
    outer-cell-slice estimate undercounts the optical admixture (which
    spreads several cells deep when J >> K) by a large factor.
    """
    return n_sites * profile.optical_weight * kappa_C / profile.v_g
