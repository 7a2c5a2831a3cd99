"""Chiral phonon-lattice toolkit.

Simulation library for a two-dimensional optomechanical kagome lattice
whose photon-phonon coupling opens topological band gaps with chiral
mechanical edge channels, plus the machinery to route quantum states
between two-level emitters through those channels.

Layers, bottom to top:

- ``params`` / ``lattice``   parameter containers and finite-lattice builder
- ``bloch``                  bulk momentum-space bands, Chern numbers, gaps
- ``stripe``                 ribbon spectra and edge-state channel data
- ``formulas``               closed-form flux / stability / coupling results
- ``markov``                 cascaded emitter-receiver input-output model
- ``dynamics``               full wavefunction transfer simulations
- ``disorder``               disorder-averaged fidelity sweeps
- ``reports`` / ``cli``      delimited artifacts, figures, command line
"""

__version__ = "0.1.0"

from .params import KagomeGeometry, OmParams, SpinDriveParams
from .lattice import FiniteLattice, build_finite_lattice
from .bloch import (
    BandStructure,
    ChernReport,
    CriticalCoupling,
    GapReport,
    analytic_gap,
    band_structure,
    bloch_hamiltonian,
    chern_numbers,
    critical_coupling,
    high_symmetry_path,
    kpath,
    numerical_gap,
)
from .stripe import (
    DispersionTable,
    EdgeStateProfile,
    edge_profile_at,
    extract_edge_states,
    find_k0,
    group_velocity,
    stripe_bands,
    stripe_hamiltonian,
)
from .formulas import (
    check_stability,
    compute_flux,
    effective_spin_coupling,
    optical_induced_hopping,
)
from .markov import (
    MarkovChannel,
    MarkovResult,
    darkstate_receiver_pulse,
    simulate_markov,
    transfer_rate,
)
from .dynamics import (
    PulseSchedule,
    TlsNode,
    TransferResult,
    TransferScenario,
    assemble_hamiltonian,
    edge_transfer_scenario,
    emitter_pulse,
    evolve,
    optimize_receiver,
    run_transfer,
)
from .disorder import DisorderSpec, SweepResult, fidelity_sweep, sample_disorder

__all__ = [
    "__version__",
    "KagomeGeometry", "OmParams", "SpinDriveParams",
    "FiniteLattice", "build_finite_lattice",
    "BandStructure", "ChernReport", "CriticalCoupling", "GapReport",
    "analytic_gap", "band_structure", "bloch_hamiltonian", "chern_numbers",
    "critical_coupling", "high_symmetry_path", "kpath", "numerical_gap",
    "DispersionTable", "EdgeStateProfile", "edge_profile_at",
    "extract_edge_states", "find_k0", "group_velocity", "stripe_bands",
    "stripe_hamiltonian",
    "check_stability", "compute_flux", "effective_spin_coupling",
    "optical_induced_hopping",
    "MarkovChannel", "MarkovResult", "darkstate_receiver_pulse",
    "simulate_markov", "transfer_rate",
    "PulseSchedule", "TlsNode", "TransferResult", "TransferScenario",
    "assemble_hamiltonian", "edge_transfer_scenario", "emitter_pulse",
    "evolve", "optimize_receiver", "run_transfer",
    "DisorderSpec", "SweepResult", "fidelity_sweep", "sample_disorder",
]
