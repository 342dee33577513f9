use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::filter::{jz_moments, step_into, Integrator, StepInfo};
use super::lindblad::SymmetricCoefficients;
use super::ModelKind;
use crate::error::{Error, Result};
use crate::gcs::{GcsState, ObservableRecord};
use crate::oracle::{FullEngine, FULL_ENGINE_MAX_SPINS};

/// `Δ²[J_z]` below which a trajectory counts as collapsed onto a `J_z`
/// eigenvalue.
pub const STEADY_VAR_JZ: f64 = 1e-6;
/// Hard limit on `κ dt`.
pub const MAX_KAPPA_DT: f64 = 1e-2;
/// `κ dt` above which a warning is logged.
pub const WARN_KAPPA_DT: f64 = 1e-3;
/// Minimum block eigenvalue below which a positivity warning is logged.
pub const NEGATIVITY_WARNING: f64 = -1e-6;

static NEGATIVITY_WARNED: AtomicBool = AtomicBool::new(false);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    /// Aggregated irrep blocks, `O(N^3)` storage.
    Block,
    /// Dense `2^N` density matrix in the product basis.
    FullOracle,
}

impl FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "block" => Ok(EngineKind::Block),
            "full_oracle" | "full" => Ok(EngineKind::FullOracle),
            other => Err(format!("unknown engine `{other}` (expected block | full_oracle)")),
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Block => "block",
            EngineKind::FullOracle => "full_oracle",
        })
    }
}

/// Initial condition. Text form: `coherent_x`, `steady_state:<M>` (`M` as a
/// decimal or `p/2` fraction), or `snapshot:<path>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitialState {
    CoherentX,
    SteadyState { two_m: i32 },
    Snapshot(PathBuf),
}

impl InitialState {
    pub fn build(&self, n_spins: u32) -> Result<GcsState> {
        match self {
            InitialState::CoherentX => GcsState::coherent_x(n_spins),
            InitialState::SteadyState { two_m } => GcsState::steady_state(n_spins, *two_m),
            InitialState::Snapshot(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
                })?;
                let state = GcsState::from_snapshot(&text)?;
                if state.n_spins() != n_spins {
                    return Err(Error::Config(format!(
                        "snapshot {} has n_spins = {}, config says {n_spins}",
                        path.display(),
                        state.n_spins()
                    )));
                }
                Ok(state)
            }
        }
    }
}

fn parse_half_integer(s: &str) -> Option<i32> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let num: i32 = num.trim().parse().ok()?;
        return (den.trim() == "2").then_some(num);
    }
    let x: f64 = s.parse().ok()?;
    let doubled = 2.0 * x;
    (doubled.fract() == 0.0 && doubled.abs() < i32::MAX as f64).then_some(doubled as i32)
}

impl FromStr for InitialState {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "coherent_x" {
            return Ok(InitialState::CoherentX);
        }
        if let Some(m) = s.strip_prefix("steady_state:") {
            return parse_half_integer(m)
                .map(|two_m| InitialState::SteadyState { two_m })
                .ok_or_else(|| format!("`{m}` is not an integer or half-integer M"));
        }
        if let Some(path) = s.strip_prefix("snapshot:") {
            return Ok(InitialState::Snapshot(PathBuf::from(path)));
        }
        Err(format!(
            "unknown initial state `{s}` (expected coherent_x | steady_state:<M> | snapshot:<path>)"
        ))
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::CoherentX => f.write_str("coherent_x"),
            InitialState::SteadyState { two_m } if two_m % 2 == 0 => {
                write!(f, "steady_state:{}", two_m / 2)
            }
            InitialState::SteadyState { two_m } => write!(f, "steady_state:{two_m}/2"),
            InitialState::Snapshot(p) => write!(f, "snapshot:{}", p.display()),
        }
    }
}

impl TryFrom<String> for InitialState {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<InitialState> for String {
    fn from(s: InitialState) -> String {
        s.to_string()
    }
}

/// Everything needed to reproduce one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    pub n_spins: u32,
    /// Weak-coupling interaction strength, units of 1/time.
    pub kappa: f64,
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    pub model: ModelKind,
    pub engine: EngineKind,
    pub integrator: Integrator,
    pub initial: InitialState,
    /// Emit a record every this many steps.
    pub record_every: usize,
    /// End the run once `Δ²[J_z] < 1e-6`.
    pub stop_at_steady_state: bool,
    /// Emit a positivity/trace diagnostic every this many records (0: only at the end).
    pub diagnostics_every: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            n_spins: 10,
            kappa: 1.0,
            dt: 1e-3,
            t_final: 5.0,
            seed: 0,
            model: ModelKind::Symmetric,
            engine: EngineKind::Block,
            integrator: Integrator::EulerMaruyama,
            initial: InitialState::CoherentX,
            record_every: 10,
            stop_at_steady_state: false,
            diagnostics_every: 100,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_spins == 0 {
            return bad("n_spins must be at least 1".into());
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final must be non-negative, got {}", self.t_final));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        let kdt = self.kappa * self.dt;
        if kdt > MAX_KAPPA_DT * (1.0 + 1e-12) {
            return bad(format!("kappa*dt = {kdt} exceeds {MAX_KAPPA_DT}"));
        }
        if kdt > WARN_KAPPA_DT * (1.0 + 1e-12) {
            log::warn!("kappa*dt = {kdt} is above {WARN_KAPPA_DT}; discretization bias grows with the step");
        }
        if self.engine == EngineKind::FullOracle && self.n_spins > FULL_ENGINE_MAX_SPINS {
            return Err(Error::Capacity {
                what: "n_spins (full_oracle engine)",
                requested: self.n_spins as usize,
                max: FULL_ENGINE_MAX_SPINS as usize,
            });
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Noise stream `stream` of `seed`: ChaCha8 keyed by `seed` (via
/// `seed_from_u64`) with the 64-bit stream id set to `stream`. Trajectory `i`
/// of an ensemble uses stream `i`; single runs use stream 0.
pub fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Innovations `dW = sqrt(dt) z`, `z` standard normal (ziggurat).
pub fn gaussian_increments(seed: u64, stream: u64, dt: f64) -> impl Iterator<Item = f64> {
    let mut rng = noise_rng(seed, stream);
    let scale = dt.sqrt();
    std::iter::repeat_with(move || scale * rng.sample::<f64, _>(StandardNormal))
}

/// A filter implementation the trajectory driver can step.
pub trait FilterEngine: Send {
    fn n_spins(&self) -> u32;
    fn kappa(&self) -> f64;
    fn step(&mut self, dw: f64) -> Result<StepInfo>;
    /// `(π[J_z], π[J_z²])`.
    fn jz_moments(&self) -> (f64, f64);
    fn record(&self, t: f64, dy: f64) -> ObservableRecord;
    fn min_eigenvalue(&self) -> f64;
    /// Current state as aggregated blocks.
    fn block_state(&self) -> GcsState;
}

pub struct BlockEngine {
    model: ModelKind,
    integrator: Integrator,
    kappa: f64,
    dt: f64,
    coeffs: Option<Arc<SymmetricCoefficients>>,
    state: GcsState,
    scratch: GcsState,
}

impl BlockEngine {
    /// `coeffs` may be shared between engines; it is built here when the
    /// symmetric model needs it and none is given.
    pub fn new(
        state: GcsState,
        model: ModelKind,
        integrator: Integrator,
        kappa: f64,
        dt: f64,
        coeffs: Option<Arc<SymmetricCoefficients>>,
    ) -> Result<Self> {
        let coeffs = match (model, coeffs) {
            (ModelKind::Collective, _) => None,
            (ModelKind::Symmetric, Some(c)) => {
                c.check_layout(&state)?;
                Some(c)
            }
            (ModelKind::Symmetric, None) => Some(Arc::new(SymmetricCoefficients::build(state.layout()))),
        };
        let scratch = state.clone();
        Ok(Self {
            model,
            integrator,
            kappa,
            dt,
            coeffs,
            state,
            scratch,
        })
    }

    pub fn state(&self) -> &GcsState {
        &self.state
    }
}

impl FilterEngine for BlockEngine {
    fn n_spins(&self) -> u32 {
        self.state.n_spins()
    }

    fn kappa(&self) -> f64 {
        self.kappa
    }

    fn step(&mut self, dw: f64) -> Result<StepInfo> {
        let info = step_into(
            &self.state,
            &mut self.scratch,
            self.model,
            self.integrator,
            self.coeffs.as_deref(),
            self.kappa,
            self.dt,
            dw,
        )?;
        std::mem::swap(&mut self.state, &mut self.scratch);
        Ok(info)
    }

    fn jz_moments(&self) -> (f64, f64) {
        jz_moments(&self.state)
    }

    fn record(&self, t: f64, dy: f64) -> ObservableRecord {
        self.state.record(t, self.kappa, dy)
    }

    fn min_eigenvalue(&self) -> f64 {
        self.state.min_eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    fn block_state(&self) -> GcsState {
        self.state.clone()
    }
}

/// Integrator health at one point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostic {
    pub t: f64,
    /// Largest per-step pre-normalization trace drift since the last diagnostic.
    pub max_trace_drift: f64,
    pub min_eigenvalue: f64,
}

/// Collapse onto a `J_z` eigenvalue, detected by the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Collapse {
    pub step: usize,
    pub two_m: i32,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<ObservableRecord>,
    pub diagnostics: Vec<Diagnostic>,
    /// Set when `stop_at_steady_state` ended the run.
    pub collapse: Option<Collapse>,
    pub final_state: GcsState,
}

impl Trajectory {
    /// `2M` of the terminal state when it has collapsed (`Δ²[J_z] < 1e-6`).
    pub fn final_two_m(&self) -> Option<i32> {
        let last = self.records.last()?;
        (last.var_jz < STEADY_VAR_JZ).then(|| (2.0 * last.mean_jz).round() as i32)
    }
}

pub(crate) fn build_engine(
    config: &TrajectoryConfig,
    coeffs: Option<Arc<SymmetricCoefficients>>,
) -> Result<Box<dyn FilterEngine>> {
    let initial = config.initial.build(config.n_spins)?;
    Ok(match config.engine {
        EngineKind::Block => Box::new(BlockEngine::new(
            initial,
            config.model,
            config.integrator,
            config.kappa,
            config.dt,
            coeffs,
        )?),
        EngineKind::FullOracle => Box::new(FullEngine::from_gcs(
            &initial,
            config.model,
            config.integrator,
            config.kappa,
            config.dt,
        )?),
    })
}

/// Single trajectory on noise stream 0 of `config.seed`.
pub fn run_trajectory(config: &TrajectoryConfig) -> Result<Trajectory> {
    run_trajectory_stream(config, 0)
}

pub fn run_trajectory_stream(config: &TrajectoryConfig, stream: u64) -> Result<Trajectory> {
    config.validate()?;
    let engine = build_engine(config, None)?;
    drive(engine, config, stream)
}

pub(crate) fn drive(
    mut engine: Box<dyn FilterEngine>,
    config: &TrajectoryConfig,
    stream: u64,
) -> Result<Trajectory> {
    let n_steps = config.n_steps();
    let mut noise = gaussian_increments(config.seed, stream, config.dt);
    let mut records = vec![engine.record(0.0, 0.0)];
    let mut diagnostics = Vec::new();
    let mut collapse = None;
    let mut y_since_record = 0.0;
    let mut drift_since_diag = 0.0f64;

    let collapsed_now = |engine: &dyn FilterEngine| {
        let (mean, second) = engine.jz_moments();
        (second - mean * mean < STEADY_VAR_JZ).then(|| (2.0 * mean).round() as i32)
    };

    if config.stop_at_steady_state {
        if let Some(two_m) = collapsed_now(engine.as_ref()) {
            collapse = Some(Collapse { step: 0, two_m });
        }
    }

    let mut step = 0;
    while collapse.is_none() && step < n_steps {
        step += 1;
        let t = step as f64 * config.dt;
        let dw = noise.next().expect("noise stream is infinite");
        let info = engine.step(dw).map_err(|e| match e {
            Error::StepSize { drift, .. } => Error::StepSize { time: Some(t), drift },
            other => other,
        })?;
        y_since_record += info.dy;
        drift_since_diag = drift_since_diag.max(info.trace_drift);

        if config.stop_at_steady_state {
            if let Some(two_m) = collapsed_now(engine.as_ref()) {
                collapse = Some(Collapse { step, two_m });
            }
        }
        let last = collapse.is_some() || step == n_steps;
        if step % config.record_every == 0 || last {
            records.push(engine.record(t, y_since_record));
            y_since_record = 0.0;
            let due = config.diagnostics_every > 0 && (records.len() - 1) % config.diagnostics_every == 0;
            if due || last {
                diagnostics.push(diagnose(engine.as_ref(), t, drift_since_diag));
                drift_since_diag = 0.0;
            }
        }
    }
    if diagnostics.is_empty() {
        diagnostics.push(diagnose(engine.as_ref(), step as f64 * config.dt, drift_since_diag));
    }
    Ok(Trajectory {
        records,
        diagnostics,
        collapse,
        final_state: engine.block_state(),
    })
}

fn diagnose(engine: &dyn FilterEngine, t: f64, max_trace_drift: f64) -> Diagnostic {
    let min_eigenvalue = engine.min_eigenvalue();
    if min_eigenvalue < NEGATIVITY_WARNING {
        if NEGATIVITY_WARNED.swap(true, Ordering::Relaxed) {
            log::debug!("t = {t}: minimum block eigenvalue {min_eigenvalue:.3e}");
        } else {
            log::warn!(
                "t = {t}: minimum block eigenvalue {min_eigenvalue:.3e}; \
                 further occurrences are logged at debug level and recorded in the diagnostics"
            );
        }
    }
    Diagnostic {
        t,
        max_trace_drift,
        min_eigenvalue,
    }
}
