//! Block engine vs. full-space engine comparisons.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::basis::CoupledBasis;
use super::full::{full_lindblad, FullEngine, FullState};
use crate::dynamics::{
    gaussian_increments, lindblad_collective, lindblad_symmetric, BlockEngine, FilterEngine, Integrator,
    ModelKind, SymmetricCoefficients,
};
use crate::error::Result;
use crate::gcs::{GcsState, ObservableRecord};

/// Largest `N` for lockstep trajectory comparisons.
pub const LOCKSTEP_MAX_SPINS: u32 = 6;
/// Generator-level tolerance (max element).
pub const GENERATOR_TOLERANCE: f64 = 1e-10;
/// Lockstep tolerance on records and blocks.
pub const LOCKSTEP_TOLERANCE: f64 = 1e-8;
/// Lockstep time step with `κ = 1`.
pub const LOCKSTEP_KAPPA_DT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorReport {
    pub n_spins: u32,
    pub model: ModelKind,
    pub n_states: usize,
    /// `max |project(L_full(lift ρ)) - L_block(ρ)|`.
    pub max_deviation: f64,
    /// Largest uniformity residual of `L_full(lift ρ)`.
    pub max_residual: f64,
}

impl GeneratorReport {
    pub fn passed(&self) -> bool {
        self.max_deviation < GENERATOR_TOLERANCE && self.max_residual < GENERATOR_TOLERANCE
    }
}

/// Compares the block dissipator with the per-site one on `n_states` random
/// degeneracy-uniform states.
pub fn generator_check(n_spins: u32, model: ModelKind, n_states: usize, seed: u64) -> Result<GeneratorReport> {
    let basis = CoupledBasis::new(n_spins)?;
    let coeffs = SymmetricCoefficients::build(basis.layout());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_deviation = 0.0f64;
    let mut max_residual = 0.0f64;
    for _ in 0..n_states {
        let state = GcsState::random(basis.layout().clone(), &mut rng);
        let block = match model {
            ModelKind::Collective => lindblad_collective(&state),
            ModelKind::Symmetric => lindblad_symmetric(&state, &coeffs)?,
        };
        let full = full_lindblad(model, &FullState::from_gcs(&state, &basis)?);
        let (projected, residual) = full.project(&basis)?;
        max_deviation = max_deviation.max(projected.max_abs_diff(&block));
        max_residual = max_residual.max(residual);
    }
    Ok(GeneratorReport {
        n_spins,
        model,
        n_states,
        max_deviation,
        max_residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub n_spins: u32,
    pub model: ModelKind,
    pub integrator: Integrator,
    pub steps: usize,
    /// Largest difference over all record fields and times.
    pub max_record_deviation: f64,
    /// Field where `max_record_deviation` occurred.
    pub worst_field: &'static str,
    /// Largest difference between block-engine blocks and projected full state.
    pub max_block_deviation: f64,
    /// Largest uniformity residual of the full state along the run.
    pub max_residual: f64,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.max_record_deviation < LOCKSTEP_TOLERANCE
            && self.max_block_deviation < LOCKSTEP_TOLERANCE
            && self.max_residual < LOCKSTEP_TOLERANCE
    }
}

/// Largest field-wise difference of two records. Undefined markers must agree;
/// per-block variances are compared weighted by the block trace, since the
/// normalized variance of a nearly empty block is ill-conditioned.
pub fn record_deviation(a: &ObservableRecord, b: &ObservableRecord) -> (f64, &'static str) {
    let mut worst = (0.0f64, "none");
    let mut check = |d: f64, name: &'static str| {
        let d = if d.is_nan() { f64::INFINITY } else { d };
        if d > worst.0 {
            worst = (d, name);
        }
    };
    check((a.t - b.t).abs(), "t");
    check((a.kappa_t - b.kappa_t).abs(), "kappa_t");
    check((a.dy - b.dy).abs(), "dY");
    check((a.mean_jx - b.mean_jx).abs(), "mean_jx");
    check((a.mean_jy - b.mean_jy).abs(), "mean_jy");
    check((a.mean_jz - b.mean_jz).abs(), "mean_jz");
    check((a.var_jz - b.var_jz).abs(), "var_jz");
    check((a.var_jy - b.var_jy).abs(), "var_jy");
    check(
        match (a.xi2, b.xi2) {
            (Some(x), Some(y)) => (x - y).abs(),
            (None, None) => 0.0,
            _ => f64::INFINITY,
        },
        "xi2",
    );
    check((a.purity - b.purity).abs(), "purity");
    if a.block_traces.len() != b.block_traces.len() {
        check(f64::INFINITY, "block_traces");
        return worst;
    }
    for (x, y) in a.block_traces.iter().zip(&b.block_traces) {
        check((x - y).abs(), "block_traces");
    }
    for ((va, vb), tr) in a.block_var_jy.iter().zip(&b.block_var_jy).zip(&a.block_traces) {
        let d = match (va, vb) {
            (Some(x), Some(y)) => (x - y).abs() * tr.min(1.0),
            (None, None) => 0.0,
            // One side just crossed the empty-block threshold.
            _ if *tr < 1e-9 => 0.0,
            _ => f64::INFINITY,
        };
        check(d, "block_var_jy");
    }
    worst
}

/// Runs both engines from `coherent_x(n_spins)` with `κ = 1`, `κ dt = 1e-3`
/// and the same innovations (stream 0 of `seed`), comparing after every
/// Euler-Maruyama step.
pub fn equivalence_check(n_spins: u32, model: ModelKind, steps: usize, seed: u64) -> Result<EquivalenceReport> {
    equivalence_check_from(&GcsState::coherent_x(n_spins)?, model, Integrator::EulerMaruyama, steps, seed)
}

pub fn equivalence_check_from(
    initial: &GcsState,
    model: ModelKind,
    integrator: Integrator,
    steps: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    let n_spins = initial.n_spins();
    if n_spins > LOCKSTEP_MAX_SPINS {
        return Err(crate::error::Error::Capacity {
            what: "n_spins (lockstep gate)",
            requested: n_spins as usize,
            max: LOCKSTEP_MAX_SPINS as usize,
        });
    }
    let (kappa, dt) = (1.0, LOCKSTEP_KAPPA_DT);
    let basis = Arc::new(CoupledBasis::new(n_spins)?);
    let mut block = BlockEngine::new(initial.clone(), model, integrator, kappa, dt, None)?;
    let full_initial = FullState::from_gcs(initial, &basis)?;
    let mut full = FullEngine::new(full_initial, basis.clone(), model, integrator, kappa, dt)?;

    let mut report = EquivalenceReport {
        n_spins,
        model,
        integrator,
        steps,
        max_record_deviation: 0.0,
        worst_field: "none",
        max_block_deviation: 0.0,
        max_residual: 0.0,
    };
    let mut compare = |block: &BlockEngine, full: &FullEngine, t: f64, dy_block: f64, dy_full: f64| -> Result<()> {
        let (dev, field) = record_deviation(&block.record(t, dy_block), &full.record(t, dy_full));
        if dev > report.max_record_deviation {
            report.max_record_deviation = dev;
            report.worst_field = field;
        }
        let (projected, residual) = full.state().project(&basis)?;
        report.max_block_deviation = report.max_block_deviation.max(projected.max_abs_diff(block.state()));
        report.max_residual = report.max_residual.max(residual);
        Ok(())
    };

    compare(&block, &full, 0.0, 0.0, 0.0)?;
    for (i, dw) in gaussian_increments(seed, 0, dt).take(steps).enumerate() {
        let a = block.step(dw)?;
        let b = full.step(dw)?;
        compare(&block, &full, (i + 1) as f64 * dt, a.dy, b.dy)?;
    }
    Ok(report)
}

/// Outcome of the whole gate suite.
#[derive(Debug, Clone, Default)]
pub struct GateReport {
    pub generators: Vec<GeneratorReport>,
    pub lockstep: Vec<EquivalenceReport>,
}

impl GateReport {
    pub fn passed(&self) -> bool {
        self.generators.iter().all(GeneratorReport::passed) && self.lockstep.iter().all(EquivalenceReport::passed)
    }

    pub fn max_generator_deviation(&self) -> f64 {
        self.generators.iter().map(|g| g.max_deviation).fold(0.0, f64::max)
    }

    pub fn max_lockstep_deviation(&self) -> f64 {
        self.lockstep
            .iter()
            .map(|e| e.max_record_deviation.max(e.max_block_deviation))
            .fold(0.0, f64::max)
    }
}

/// Generator checks for both models at `N = 2..=6` (50 states each) and
/// lockstep runs of 1000 steps from `coherent_x` for every model and
/// integrator at the same sizes.
pub fn run_gate(seed: u64) -> Result<GateReport> {
    use rayon::prelude::*;
    let cases: Vec<(u32, ModelKind)> = (2..=LOCKSTEP_MAX_SPINS)
        .flat_map(|n| [(n, ModelKind::Collective), (n, ModelKind::Symmetric)])
        .collect();
    let generators = cases
        .par_iter()
        .map(|&(n, model)| generator_check(n, model, 50, seed.wrapping_add(n as u64)))
        .collect::<Result<Vec<_>>>()?;
    let runs: Vec<(u32, ModelKind, Integrator)> = cases
        .iter()
        .flat_map(|&(n, m)| [(n, m, Integrator::EulerMaruyama), (n, m, Integrator::Exponential)])
        .collect();
    let lockstep = runs
        .par_iter()
        .map(|&(n, model, integrator)| {
            let initial = GcsState::coherent_x(n)?;
            equivalence_check_from(&initial, model, integrator, 1000, seed.wrapping_add(n as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GateReport { generators, lockstep })
}

impl fmt::Display for GateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
        for g in &self.generators {
            writeln!(
                f,
                "generator n_spins={} model={} states={} max_deviation={:.3e} max_residual={:.3e} tolerance={:.0e} {}",
                g.n_spins,
                g.model,
                g.n_states,
                g.max_deviation,
                g.max_residual,
                GENERATOR_TOLERANCE,
                verdict(g.passed())
            )?;
        }
        for e in &self.lockstep {
            writeln!(
                f,
                "lockstep n_spins={} model={} integrator={} steps={} max_record_deviation={:.3e} worst_field={} max_block_deviation={:.3e} max_residual={:.3e} tolerance={:.0e} {}",
                e.n_spins,
                e.model,
                e.integrator,
                e.steps,
                e.max_record_deviation,
                e.worst_field,
                e.max_block_deviation,
                e.max_residual,
                LOCKSTEP_TOLERANCE,
                verdict(e.passed())
            )?;
        }
        write!(f, "gate {}", verdict(self.passed()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_agree_small() {
        for model in [ModelKind::Collective, ModelKind::Symmetric] {
            let r = generator_check(3, model, 5, 1).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn lockstep_short() {
        let r = equivalence_check(3, ModelKind::Symmetric, 50, 2).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn deviation_flags_marker_mismatch() {
        let s = GcsState::coherent_x(2).unwrap();
        let a = s.record(0.0, 1.0, 0.0);
        let mut b = a.clone();
        assert_eq!(record_deviation(&a, &b).0, 0.0);
        b.xi2 = None;
        assert_eq!(record_deviation(&a, &b), (f64::INFINITY, "xi2"));
    }
}
