//! Conditional dynamics under continuous `J_z` measurement.

mod ensemble;
mod filter;
mod lindblad;
mod trajectory;

use serde::{Deserialize, Serialize};

pub use ensemble::{
    binomial_chi_square, ensemble_run, ChiSquare, EnsembleSummary, SeriesStat, TerminalOutcome,
};
pub use filter::{filter_step, filter_step_with, Integrator, StepInfo, MAX_TRACE_DRIFT};
pub use lindblad::{lindblad_collective, lindblad_symmetric, SymmetricCoefficients};
pub use trajectory::{
    gaussian_increments, noise_rng, run_trajectory, run_trajectory_stream, BlockEngine, Diagnostic,
    Collapse, EngineKind, FilterEngine, InitialState, Trajectory, TrajectoryConfig, STEADY_VAR_JZ,
};

/// Which measurement model drives the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Single field mode coupled to the collective `J_z`.
    Collective,
    /// One field mode per particle, all focused onto one detector.
    Symmetric,
}

impl ModelKind {
    /// Effective measurement rate `κ_eff`: the symmetric record carries
    /// `1/sqrt(N)` of the collective signal amplitude.
    pub fn measurement_strength(self, kappa: f64, n_spins: f64) -> f64 {
        match self {
            ModelKind::Collective => kappa,
            ModelKind::Symmetric => kappa / n_spins,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Collective => "collective",
            ModelKind::Symmetric => "symmetric",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "collective" => Ok(ModelKind::Collective),
            "symmetric" => Ok(ModelKind::Symmetric),
            other => Err(format!("unknown model `{other}` (expected collective | symmetric)")),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
