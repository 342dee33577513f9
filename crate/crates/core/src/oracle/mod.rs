//! Brute-force `2^N` reference implementation used to validate the block engine.

mod basis;
mod full;
mod gate;

pub use basis::{coupled_basis, BasisLabel, CoupledBasis, COUPLED_BASIS_MAX_SPINS};
pub use full::{
    collective_ops, full_lindblad, full_lindblad_adjoint, FullEngine, FullOps, FullState, FULL_ENGINE_MAX_SPINS,
};
pub use gate::{
    equivalence_check, equivalence_check_from, generator_check, record_deviation, run_gate, EquivalenceReport,
    GateReport, GeneratorReport, GENERATOR_TOLERANCE, LOCKSTEP_KAPPA_DT, LOCKSTEP_MAX_SPINS, LOCKSTEP_TOLERANCE,
};
