"""Closed-form diagnostics: synthetic flux, induced hopping, stability,
and the effective spin-phonon coupling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import OmParams, SpinDriveParams


@dataclass(frozen=True)
class InducedHopping:
    value: complex          # K^opt
    validity_ratio: float   # J / |omega_M + Delta|; formula assumes << 1... not enforced


@dataclass(frozen=True)
class StabilityReport:
    required_kappa_M: float
    margin_ratio: float
    stable: bool


@dataclass(frozen=True)
class SpinCoupling:
    g_sp: float
    omega_0: float


def compute_flux(p: OmParams) -> float:
    """Synthetic flux per basis triangle, in radians.

    Phi = sign(delta_theta) * 3 arctan( sqrt(3) J G^2 / (J G^2 - 2 K (Delta+omega_M)^2) );
    at the singular denominator the limiting value +-3pi/2 is returned.
    The same number is the accumulated phase of the combined hopping
    K + K^opt around A -> B -> C -> A.
    """
    sign = 1.0 if p.delta_theta >= 0 else -1.0
    num = np.sqrt(3.0) * p.J * p.G ** 2
    den = p.J * p.G ** 2 - 2.0 * p.K * (p.Delta + p.omega_M) ** 2
    if den == 0.0:
        return sign * 1.5 * np.pi
    return sign * 3.0 * np.arctan(num / den)


def optical_induced_hopping(p: OmParams) -> InducedHopping:
    """Optically-induced phonon hopping K^opt = G^2 J e^{i delta_theta} / (omega_M+Delta)^2.

    Raises on exact photon-phonon resonance (omega_M + Delta = 0).  The
    perturbative validity ratio J/|omega_M+Delta| is reported, not enforced.
    """
    res = p.omega_M + p.Delta
    if res == 0.0:
        raise ValueError("omega_M + Delta = 0: drive resonant, no dispersive hopping")
    mag = p.G ** 2 * p.J / res ** 2
    return InducedHopping(value=mag * np.exp(1j * p.delta_theta),
                          validity_ratio=p.J / abs(res))


def check_stability(p: OmParams) -> StabilityReport:
    """Mechanical damping needed to offset counter-rotating heating.

    With delta_K = delta_om + 2 omega_M, the array stays stable for
    kappa_M >= kappa_C G^2 / delta_K^2.  Raises when delta_K <= 0 (the
    rotating-wave regime assumed everywhere else is gone there).
    """
    delta_K = p.delta_om + 2.0 * p.omega_M
    if delta_K <= 0:
        raise ValueError(f"delta_K = {delta_K} <= 0: outside the rotating-wave regime")
    required = p.kappa_C * p.G ** 2 / delta_K ** 2
    margin = np.inf if required == 0 else p.kappa_M / required
    return StabilityReport(required_kappa_M=required, margin_ratio=margin,
                           stable=p.kappa_M >= required)


def effective_spin_coupling(s: SpinDriveParams) -> SpinCoupling:
    """g_sp = g_s Omega / delta_drive and the emitted-phonon frequency
    omega_0 = omega_d + omega_B."""
    if s.delta_drive == 0.0:
        raise ZeroDivisionError("delta_drive = 0: no dispersive spin-phonon coupling")
    return SpinCoupling(g_sp=s.g_s * s.Omega / s.delta_drive,
                        omega_0=s.omega_d + s.omega_B)


def flux_from_hopping_phases(p: OmParams) -> float:
    """Accumulated arg of (K + K^opt per bond) around one triangle — the
    independent cross-check for compute_flux."""
    t = p.G ** 2 * p.J / (p.omega_M + p.Delta) ** 2
    bond = p.K + t * np.exp(-1j * p.delta_theta)
    return 3.0 * np.angle(bond)
