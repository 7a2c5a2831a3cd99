"""Static parameter disorder: per-site ensembles and fidelity-vs-strength
sweeps of the transfer protocol.

Each targeted parameter x gets an independent per-site multiplier
x_j = (1 + p_j) x with p_j drawn uniformly from [-W/2, W/2].  The driving
phases theta_j are never disordered.  Realization r of a sweep draws from
the sub-seed (seed, r), so a sweep is reproducible bit-for-bit from
(seed, W grid, n) alone and two W values share their underlying uniform
draws (common random numbers).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import TransferScenario, run_transfer
from .lattice import FiniteLattice
from .params import OmParams

_ALL_TARGETS = ("omega_M", "Delta", "G", "kappa_C", "kappa_M")


@dataclass(frozen=True)
class DisorderSpec:
    W: float
    seed: int
    targets: tuple = _ALL_TARGETS
    n_realizations: int = 50
    shared_draw: bool = False    # one multiplier per site for all targets

    def __post_init__(self):
        if self.W < 0:
            raise ValueError("disorder strength W must be non-negative")
        if self.W >= 2:
            raise ValueError(f"W = {self.W} >= 2 allows negative rates "
                             "(multiplier 1 + p can cross zero)")
        unknown = set(self.targets) - set(_ALL_TARGETS)
        if unknown:
            raise ValueError(f"unknown disorder targets: {sorted(unknown)}")
        if self.n_realizations < 1:
            raise ValueError("need at least one realization")


def sample_disorder(spec: DisorderSpec, lattice: FiniteLattice, p: OmParams,
                    realization: int = 0) -> dict:
    """Per-site parameter tables for one realization.

    Returns {name: array of absolute per-site values} for every targeted
    parameter.  Deterministic in (spec.seed, realization); the draw order
    is fixed by _ALL_TARGETS, so adding or removing targets does not
    reshuffle the others.
    """
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, realization)))
    ns = lattice.n_sites
    base = {"omega_M": p.omega_M, "Delta": p.Delta, "G": p.G,
            "kappa_C": p.kappa_C, "kappa_M": p.kappa_M}
    shared = rng.uniform(-0.5, 0.5, ns) if spec.shared_draw else None
    tables = {}
    for name in _ALL_TARGETS:
        u = shared if spec.shared_draw else rng.uniform(-0.5, 0.5, ns)
        if name in spec.targets:
            tables[name] = base[name] * (1.0 + spec.W * u)
    return tables


@dataclass(frozen=True)
class SweepResult:
    W: np.ndarray
    mean_F: np.ndarray
    stderr: np.ndarray
    n: int
    F_all: np.ndarray        # (len(W), n) raw fidelities
    clean_F: float
    seed: int
    scenario_digest: str


def scenario_digest(scenario: TransferScenario) -> str:
    """Stable hash of the clean scenario definition (disorder excluded)."""
    em, rv = scenario.emitter, scenario.receiver

    def node(nd):
        pulse = None
        if nd.pulse is not None:
            pulse = {"kind": nd.pulse.kind, "g_max": nd.pulse.g_max,
                     "time_unit": nd.pulse.time_unit,
                     "params": {k: (list(map(repr, v)) if isinstance(v, list)
                                    else repr(v))
                                for k, v in nd.pulse.params.items()}}
        return {"site": nd.site_index, "omega_0": nd.omega_0, "role": nd.role,
                "pulse": pulse}

    doc = {"Nx": scenario.Nx, "Ny": scenario.Ny, "p": scenario.p.to_json(),
           "emitter": node(em), "receiver": node(rv),
           "t_max": scenario.t_max, "dt": scenario.dt,
           "dt_opt": scenario.dt_opt, "mode_window": scenario.mode_window}
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha1(blob).hexdigest()


def fidelity_sweep(scenario: TransferScenario, W_grid, seed: int,
                   n_realizations: int = 50, targets: tuple = _ALL_TARGETS,
                   shared_draw: bool = False,
                   reoptimize: bool = False) -> SweepResult:
    """Mean transfer fidelity versus disorder strength.

    The clean scenario is run first (optimizing the receiver pulse if
    needed); each disordered realization then reuses that same clean
    pulse, unless ``reoptimize`` re-runs the greedy pass per realization.
    W = 0 entries reuse the clean run: every realization is exactly the
    clean lattice.
    """
    from .lattice import build_finite_lattice

    W_grid = np.asarray(W_grid, dtype=float)
    clean = run_transfer(scenario)
    schedule = clean.receiver_schedule
    lat = build_finite_lattice(scenario.Nx, scenario.Ny)
    digest = scenario_digest(scenario)

    receiver = replace(scenario.receiver,
                       pulse=None if reoptimize else schedule)
    F_all = np.zeros((len(W_grid), n_realizations))
    for iw, W in enumerate(W_grid):
        if W == 0.0:
            F_all[iw, :] = clean.F
            continue
        spec = DisorderSpec(W=float(W), seed=seed, targets=tuple(targets),
                            n_realizations=n_realizations,
                            shared_draw=shared_draw)
        for r in range(n_realizations):
            tables = sample_disorder(spec, lat, scenario.p, realization=r)
            sc = replace(scenario, receiver=receiver, tables=tables)
            F_all[iw, r] = run_transfer(sc).F
    mean = F_all.mean(axis=1)
    stderr = (F_all.std(axis=1, ddof=1) / np.sqrt(n_realizations)
              if n_realizations > 1 else np.zeros(len(W_grid)))
    return SweepResult(W=W_grid, mean_F=mean, stderr=stderr,
                       n=n_realizations, F_all=F_all, clean_F=clean.F,
                       seed=seed, scenario_digest=digest)
