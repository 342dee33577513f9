//! Quantum filters for `N` spin-1/2 particles under continuous measurement of
//! the collective `J_z`, either through one shared field mode (collective
//! model) or one mode per particle focused onto a common detector (symmetric
//! model).
//!
//! The conditional state is kept in block form, one aggregated matrix per
//! total-spin irrep ([`gcs::GcsState`]), which costs `O(N^3)` memory instead
//! of `4^N`. The [`oracle`] module holds a dense `2^N` implementation used to
//! check the block engine at small `N`.

pub mod dynamics;
pub mod error;
pub mod gcs;
pub mod oracle;
pub mod report;
pub mod spinrep;

pub use dynamics::{
    ensemble_run, filter_step, run_trajectory, EngineKind, InitialState, ModelKind, Trajectory, TrajectoryConfig,
};
pub use error::{Error, Result};
pub use gcs::{GcsState, Observable, ObservableRecord};
pub use spinrep::{BlockLayout, Irrep};
