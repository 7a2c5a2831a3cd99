"""Physical parameters and Kagome geometry.

Conventions used throughout the package:

* the phonon hopping ``K`` is the frequency unit (K = 1), ``1/K`` the time
  unit, and the nearest-neighbor distance ``a`` the length unit;
* both hoppings are positive (``K, J > 0``);
* the drive detuning ``Delta = omega_L - omega_C`` is negative, and the
  working detuning between the lowest optical band and the mechanical
  Dirac points is ``delta_om = -Delta - 2J - omega_M - K``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, asdict

import numpy as np

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class KagomeGeometry:
    """Kagome lattice: triangular Bravais lattice with a three-site basis.

    The Bravais vectors are R1 = -(1, sqrt(3)) a and R2 = (2, 0) a, so
    |R1| = |R2| = 2a with a 120 degree angle between them.  The basis
    offsets place A at the top of the upward triangle and B, C below it,
    every nearest-neighbor pair exactly ``a`` apart.  Increasing cell row
    index moves down-left along R1, so row m = 0 is the top of a finite
    sample.
    """

    a: float = 1.0

    @property
    def R1(self) -> np.ndarray:
        return -self.a * np.array([1.0, SQRT3])

    @property
    def R2(self) -> np.ndarray:
        return self.a * np.array([2.0, 0.0])

    @property
    def basis(self) -> np.ndarray:
        """Offsets of (A, B, C) within the cell, rows indexed by s."""
        return self.a * np.array(
            [[0.0, 0.0], [-0.5, -SQRT3 / 2], [0.5, -SQRT3 / 2]]
        )

    @property
    def reciprocal(self) -> np.ndarray:
        """Rows are (b1, b2) with R_i . b_j = 2 pi delta_ij."""
        A = np.stack([self.R1, self.R2])
        return 2.0 * np.pi * np.linalg.inv(A).T


@dataclass(frozen=True)
class OmParams:
    """Crystal-level rates of the driven optomechanical array, in units of K.

    ``delta_theta`` is the drive-phase step between the three sublattices;
    the canonical flux patterns are +-2pi/3 (maximal triangle flux) and
    3pi/2 (the transfer working point).  Any step is accepted.
    """

    G: float
    Delta: float
    omega_M: float = 460.0
    J: float = 200.0
    K: float = 1.0
    kappa_C: float = 0.0
    kappa_M: float = 0.0
    delta_theta: float = 2.0 * np.pi / 3.0
    omega_C: float = 2.0e6

    def __post_init__(self):
        if self.K <= 0 or self.J <= 0:
            raise ValueError("positive-hopping convention requires K > 0 and J > 0")
        if self.Delta >= 0:
            raise ValueError("red-detuned drive required: Delta < 0")
        if self.kappa_C < 0 or self.kappa_M < 0:
            raise ValueError("decay rates must be non-negative")

    @property
    def delta_om(self) -> float:
        """Detuning of the lowest optical band from the mechanical Dirac points."""
        return -self.Delta - 2.0 * self.J - self.omega_M - self.K

    @classmethod
    def from_detuning(cls, delta_om: float, *, G: float, omega_M: float = 460.0,
                      J: float = 200.0, K: float = 1.0, Q_C: float | None = None,
                      Q_M: float | None = None, kappa_C: float = 0.0,
                      kappa_M: float = 0.0, delta_theta: float = 2.0 * np.pi / 3.0,
                      omega_C: float = 2.0e6) -> "OmParams":
        """Build from delta_om; losses optionally via quality factors.

        kappa_C = omega_C / Q_C and kappa_M = omega_M / Q_M when the Q's
        are given.
        """
        if Q_C is not None:
            kappa_C = omega_C / Q_C
        if Q_M is not None:
            kappa_M = omega_M / Q_M
        Delta = -(delta_om + 2.0 * J + omega_M + K)
        return cls(G=G, Delta=Delta, omega_M=omega_M, J=J, K=K,
                   kappa_C=kappa_C, kappa_M=kappa_M,
                   delta_theta=delta_theta, omega_C=omega_C)

    def replace(self, **kw) -> "OmParams":
        d = asdict(self)
        d.update(kw)
        return OmParams(**d)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "OmParams":
        d = json.loads(text)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown OmParams keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class SpinDriveParams:
    """Raman-drive parameters of a single spin qubit, in units of K.

    ``delta_drive`` is the detuning of the two-photon drive; the effective
    spin-phonon coupling is g_sp = g_s * Omega / delta_drive, valid in the
    adiabatic regime |delta_drive| >= 4 max(|g_s|, |Omega|) (a warning is
    raised outside it).
    """

    g_s: float
    Omega: float
    delta_drive: float
    omega_d: float = 0.0
    omega_B: float = 0.0

    def __post_init__(self):
        lim = 4.0 * max(abs(self.g_s), abs(self.Omega))
        if abs(self.delta_drive) < lim:
            warnings.warn(
                "adiabatic elimination marginal: |delta_drive| < "
                "4 max(|g_s|, |Omega|)", stacklevel=2)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SpinDriveParams":
        d = json.loads(text)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown SpinDriveParams keys: {sorted(unknown)}")
        return cls(**d)
