"""Finite Kagome samples with straight edges.

A finite lattice is the parallelogram spanned by ``Ny`` rows along R1 and
``Nx`` columns along R2.  Removing every A site from the top row (m = 0)
leaves a straight B-C edge there; the other three sides terminate the
parallelogram as-is, so corners appear between adjacent sides.  Sites are
ordered canonically (row m, then column n, then basis s) so that
eigenvector components are reproducible across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import KagomeGeometry

# neighbors of A(m, n): B and C of the same cell plus B(m-1, n), C(m-1, n-1);
# B(m, n) additionally bonds to C(m, n) and C(m, n-1).  Everything else follows
# by symmetry of the bond list.
_A_NEIGHBORS = ((0, 0, 1), (0, 0, 2), (-1, 0, 1), (-1, -1, 2))


@dataclass(frozen=True)
class FiniteLattice:
    Nx: int
    Ny: int
    sites: tuple            # (m, n, s) per site, canonical order
    positions: np.ndarray   # (n_sites, 2)
    bonds: tuple            # (i, j) index pairs, i < j
    boundary_mask: np.ndarray
    removed_A_rows: bool
    geometry: KagomeGeometry = field(default_factory=KagomeGeometry)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    def site_index(self, m: int, n: int, s: int) -> int:
        return self._index[(m, n, s)]

    def __contains__(self, mns) -> bool:
        return tuple(mns) in self._index

    @property
    def _index(self) -> dict:
        # built lazily; frozen dataclass, so stash on the instance dict
        cached = self.__dict__.get("_index_cache")
        if cached is None:
            cached = {t: i for i, t in enumerate(self.sites)}
            object.__setattr__(self, "_index_cache", cached)
        return cached

    def neighbor_counts(self) -> np.ndarray:
        cnt = np.zeros(self.n_sites, dtype=int)
        for i, j in self.bonds:
            cnt[i] += 1
            cnt[j] += 1
        return cnt


def build_finite_lattice(Nx: int, Ny: int, trim_top_A: bool = True,
                         geometry: KagomeGeometry | None = None) -> FiniteLattice:
    """Construct the finite sample; site count is 3 Nx Ny - Nx when trimmed.

    Raises ValueError for Nx or Ny below 2.
    """
    if Nx < 2 or Ny < 2:
        raise ValueError(f"lattice needs Nx, Ny >= 2, got ({Nx}, {Ny})")
    geo = geometry or KagomeGeometry()

    sites = []
    for m in range(Ny):
        for n in range(Nx):
            for s in range(3):
                if trim_top_A and m == 0 and s == 0:
                    continue
                sites.append((m, n, s))
    index = {t: i for i, t in enumerate(sites)}
    basis = geo.basis
    positions = np.array([m * geo.R1 + n * geo.R2 + basis[s]
                          for (m, n, s) in sites])

    bonds = []
    for (m, n, s) in sites:
        if s == 0:
            targets = [(m + dm, n + dn, t) for (dm, dn, t) in _A_NEIGHBORS]
        elif s == 1:
            targets = [(m, n, 2)]
        else:
            targets = [(m, n + 1, 1)]   # C(m,n) - B(m,n+1) closes the row
        i = index[(m, n, s)]
        for t in targets:
            j = index.get(t)
            if j is not None:
                bonds.append((min(i, j), max(i, j)))
    bonds = tuple(sorted(set(bonds)))

    cnt = np.zeros(len(sites), dtype=int)
    for i, j in bonds:
        cnt[i] += 1
        cnt[j] += 1
    boundary_mask = cnt < 4

    lat = FiniteLattice(Nx=Nx, Ny=Ny, sites=tuple(sites), positions=positions,
                        bonds=bonds, boundary_mask=boundary_mask,
                        removed_A_rows=trim_top_A, geometry=geo)
    return lat


def brute_force_bonds(positions: np.ndarray, a: float = 1.0,
                      tol: float = 1e-9) -> set:
    """All index pairs at distance a, by a full distance scan (test oracle)."""
    d2 = ((positions[:, None, :] - positions[None, :, :]) ** 2).sum(-1)
    I, J = np.where(np.abs(d2 - a * a) < tol)
    return {(i, j) for i, j in zip(I, J) if i < j}
