//! Dense `2^N` density matrices in the product basis.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::basis::CoupledBasis;
use crate::dynamics::{FilterEngine, Integrator, ModelKind, StepInfo, MAX_TRACE_DRIFT};
use crate::error::{Error, Result};
use crate::gcs::{GcsState, ObservableRecord, EMPTY_BLOCK_TRACE, XI2_DENOMINATOR_FLOOR};

/// Largest `N` the full-space trajectory engine accepts.
pub const FULL_ENGINE_MAX_SPINS: u32 = 8;

const ZERO: C64 = C64::new(0.0, 0.0);

/// `j_z` eigenvalue of spin `site` in product state `p`.
fn site_spin(p: usize, site: u32) -> f64 {
    if p >> site & 1 == 0 {
        0.5
    } else {
        -0.5
    }
}

/// Total `M` of product state `p`.
fn total_m(p: usize, n_spins: u32) -> f64 {
    n_spins as f64 / 2.0 - (p.count_ones() as f64)
}

/// Dense collective operators.
#[derive(Debug, Clone)]
pub struct FullOps {
    pub jz: DMatrix<C64>,
    pub jplus: DMatrix<C64>,
    pub jx: DMatrix<C64>,
    pub jy: DMatrix<C64>,
}

impl FullOps {
    pub fn casimir(&self) -> DMatrix<C64> {
        &self.jx * &self.jx + &self.jy * &self.jy + &self.jz * &self.jz
    }
}

pub fn collective_ops(n_spins: u32) -> FullOps {
    let dim = 1usize << n_spins;
    let mut jz = DMatrix::from_element(dim, dim, ZERO);
    let mut jplus = DMatrix::from_element(dim, dim, ZERO);
    for p in 0..dim {
        jz[(p, p)] = C64::new(total_m(p, n_spins), 0.0);
        for site in 0..n_spins {
            let bit = 1usize << site;
            if p & bit != 0 {
                jplus[(p ^ bit, p)] += C64::new(1.0, 0.0);
            }
        }
    }
    let jminus = jplus.adjoint();
    let jx = (&jplus + &jminus).map(|z| z * 0.5);
    let jy = (&jplus - &jminus).map(|z| z / C64::new(0.0, 2.0));
    FullOps { jz, jplus, jx, jy }
}

/// A dense density matrix of `N` spins.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    n_spins: u32,
    rho: DMatrix<C64>,
}

impl FullState {
    pub fn new(n_spins: u32, rho: DMatrix<C64>) -> Result<Self> {
        let dim = 1usize << n_spins;
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::Usage(format!(
                "{}x{} matrix for {n_spins} spins (expected {dim}x{dim})",
                rho.nrows(),
                rho.ncols()
            )));
        }
        Ok(Self { n_spins, rho })
    }

    /// `⊗_n |ψ_n⟩` with `|ψ_n⟩ = cos(θ_n/2)|↑⟩ + e^{iφ_n} sin(θ_n/2)|↓⟩`.
    pub fn product(angles: &[(f64, f64)]) -> Self {
        let n_spins = angles.len() as u32;
        let dim = 1usize << n_spins;
        let psi: Vec<C64> = (0..dim)
            .map(|p| {
                angles.iter().enumerate().fold(C64::new(1.0, 0.0), |acc, (site, &(theta, phi))| {
                    if p >> site & 1 == 0 {
                        acc * (theta / 2.0).cos()
                    } else {
                        acc * C64::from_polar((theta / 2.0).sin(), phi)
                    }
                })
            })
            .collect();
        let rho = DMatrix::from_fn(dim, dim, |a, b| psi[a] * psi[b].conj());
        Self { n_spins, rho }
    }

    /// Embeds a block state: `U (⊕_J ρ^J/d_N^J ⊗ 1) U^T`.
    pub fn from_gcs(state: &GcsState, basis: &CoupledBasis) -> Result<Self> {
        if state.n_spins() != basis.n_spins() {
            return Err(Error::Usage(format!(
                "state has {} spins, basis {}",
                state.n_spins(),
                basis.n_spins()
            )));
        }
        let dim = basis.dim();
        let mut coupled = DMatrix::from_element(dim, dim, ZERO);
        for (k, irrep) in state.layout().irreps().iter().enumerate() {
            let d = irrep.degeneracy as f64;
            for copy in 0..irrep.degeneracy as usize {
                for a in 0..irrep.dim() {
                    for b in 0..irrep.dim() {
                        coupled[(basis.column(k, copy, a), basis.column(k, copy, b))] = state.get(k, a, b) / d;
                    }
                }
            }
        }
        let u = complexify(basis.transform());
        let rho = &u * coupled * u.transpose();
        Ok(Self {
            n_spins: state.n_spins(),
            rho,
        })
    }

    pub fn n_spins(&self) -> u32 {
        self.n_spins
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `tr[X ρ]`, real part.
    pub fn expect(&self, x: &DMatrix<C64>) -> f64 {
        let dim = self.rho.nrows();
        let mut acc = ZERO;
        for a in 0..dim {
            for b in 0..dim {
                acc += x[(a, b)] * self.rho[(b, a)];
            }
        }
        acc.re
    }

    pub fn hermitize(&mut self) {
        let h = (&self.rho + self.rho.adjoint()).map(|z| z * 0.5);
        self.rho = h;
    }

    pub fn scale(&mut self, factor: f64) {
        self.rho.iter_mut().for_each(|z| *z *= factor);
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.rho.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Aggregated blocks `ρ^J_{MM'} = Σ_i ⟨J,M,i|ρ|J,M',i⟩` and the largest
    /// element of `ρ` outside the degeneracy-uniform family, in the coupled basis.
    pub fn project(&self, basis: &CoupledBasis) -> Result<(GcsState, f64)> {
        if self.n_spins != basis.n_spins() {
            return Err(Error::Usage(format!(
                "state has {} spins, basis {}",
                self.n_spins,
                basis.n_spins()
            )));
        }
        let u = complexify(basis.transform());
        let coupled = u.transpose() * &self.rho * &u;
        let mut state = GcsState::zeros(basis.layout().clone());
        for (k, irrep) in basis.layout().irreps().iter().enumerate() {
            let dim = irrep.dim();
            let block = state.block_mut(k);
            for copy in 0..irrep.degeneracy as usize {
                for a in 0..dim {
                    for b in 0..dim {
                        block[a * dim + b] += coupled[(basis.column(k, copy, a), basis.column(k, copy, b))];
                    }
                }
            }
        }
        // Residual against the uniform embedding of the projected blocks.
        let layout = basis.layout();
        let labels = basis.labels();
        let index: Vec<(usize, usize, usize)> = labels
            .iter()
            .map(|l| {
                let k = layout.index_of(l.two_j).expect("label irrep in layout");
                let a = layout.irreps()[k].index_of(l.two_m).expect("label M in irrep");
                (k, l.copy, a)
            })
            .collect();
        let mut residual = 0.0f64;
        for (r, &(kr, ir, ar)) in index.iter().enumerate() {
            for (c, &(kc, ic, ac)) in index.iter().enumerate() {
                let expected = if kr == kc && ir == ic {
                    state.get(kr, ar, ac) / layout.irreps()[kr].degeneracy as f64
                } else {
                    ZERO
                };
                residual = residual.max((coupled[(r, c)] - expected).norm());
            }
        }
        Ok((state, residual))
    }
}

fn complexify(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

/// Dissipator in the product basis. Collective: `J_z ρ J_z - ½{J_z², ρ}`.
/// Symmetric: `Σ_n j_n ρ j_n - ½{j_n², ρ}` summed site by site, `j_n = σ_z^(n)/2`.
pub fn full_lindblad(model: ModelKind, state: &FullState) -> FullState {
    let n = state.n_spins;
    let dim = 1usize << n;
    let rho = &state.rho;
    let out = match model {
        ModelKind::Collective => DMatrix::from_fn(dim, dim, |a, b| {
            let (ma, mb) = (total_m(a, n), total_m(b, n));
            rho[(a, b)] * (ma * mb - 0.5 * (ma * ma + mb * mb))
        }),
        ModelKind::Symmetric => DMatrix::from_fn(dim, dim, |a, b| {
            (0..n).fold(ZERO, |acc, site| {
                let (sa, sb) = (site_spin(a, site), site_spin(b, site));
                acc + rho[(a, b)] * (sa * sb - 0.5 * (sa * sa + sb * sb))
            })
        }),
    };
    FullState { n_spins: n, rho: out }
}

/// Heisenberg-picture dissipator `L†(X)` from dense jump operators.
pub fn full_lindblad_adjoint(model: ModelKind, n_spins: u32, x: &DMatrix<C64>) -> DMatrix<C64> {
    let dim = 1usize << n_spins;
    let diag_op = |f: &dyn Fn(usize) -> f64| {
        DMatrix::from_fn(dim, dim, |a, b| if a == b { C64::new(f(a), 0.0) } else { ZERO })
    };
    let dissipate = |l: &DMatrix<C64>| {
        let l2 = l * l;
        l * x * l - (&l2 * x + x * &l2).map(|z| z * 0.5)
    };
    match model {
        ModelKind::Collective => dissipate(&diag_op(&|p| total_m(p, n_spins))),
        ModelKind::Symmetric => (0..n_spins).fold(DMatrix::from_element(dim, dim, ZERO), |acc, site| {
            acc + dissipate(&diag_op(&|p| site_spin(p, site)))
        }),
    }
}

/// Filter on the full density matrix, with the same discretizations as the
/// block engine.
pub struct FullEngine {
    model: ModelKind,
    integrator: Integrator,
    kappa: f64,
    dt: f64,
    basis: Arc<CoupledBasis>,
    ops: Arc<FullOps>,
    state: FullState,
    jz_diag: Vec<f64>,
}

impl FullEngine {
    pub fn new(
        state: FullState,
        basis: Arc<CoupledBasis>,
        model: ModelKind,
        integrator: Integrator,
        kappa: f64,
        dt: f64,
    ) -> Result<Self> {
        if state.n_spins > FULL_ENGINE_MAX_SPINS {
            return Err(Error::Capacity {
                what: "n_spins (full_oracle engine)",
                requested: state.n_spins as usize,
                max: FULL_ENGINE_MAX_SPINS as usize,
            });
        }
        let n = state.n_spins;
        let jz_diag = (0..1usize << n).map(|p| total_m(p, n)).collect();
        Ok(Self {
            model,
            integrator,
            kappa,
            dt,
            ops: Arc::new(collective_ops(n)),
            basis,
            state,
            jz_diag,
        })
    }

    pub fn from_gcs(state: &GcsState, model: ModelKind, integrator: Integrator, kappa: f64, dt: f64) -> Result<Self> {
        if state.n_spins() > FULL_ENGINE_MAX_SPINS {
            return Err(Error::Capacity {
                what: "n_spins (full_oracle engine)",
                requested: state.n_spins() as usize,
                max: FULL_ENGINE_MAX_SPINS as usize,
            });
        }
        let basis = Arc::new(CoupledBasis::new(state.n_spins())?);
        let full = FullState::from_gcs(state, &basis)?;
        Self::new(full, basis, model, integrator, kappa, dt)
    }

    pub fn state(&self) -> &FullState {
        &self.state
    }
}

impl FilterEngine for FullEngine {
    fn n_spins(&self) -> u32 {
        self.state.n_spins
    }

    fn kappa(&self) -> f64 {
        self.kappa
    }

    fn step(&mut self, dw: f64) -> Result<StepInfo> {
        let n = self.state.n_spins as f64;
        let (mean_jz, _) = self.jz_moments();
        let kappa_eff = self.model.measurement_strength(self.kappa, n);
        let strength = kappa_eff.sqrt();
        let drift = full_lindblad(self.model, &self.state);
        let kappa_dt = self.kappa * self.dt;
        let kick = strength * dw;
        let dim = self.jz_diag.len();
        let rho = &self.state.rho;
        let next = match self.integrator {
            Integrator::EulerMaruyama => DMatrix::from_fn(dim, dim, |a, b| {
                let r = rho[(a, b)];
                r + drift.rho[(a, b)] * kappa_dt + r * (kick * (self.jz_diag[a] + self.jz_diag[b] - 2.0 * mean_jz))
            }),
            Integrator::Exponential => {
                let measured = full_lindblad(ModelKind::Collective, &self.state);
                let rest_scale = match self.model {
                    ModelKind::Collective => 0.0,
                    ModelKind::Symmetric => 1.0,
                };
                DMatrix::from_fn(dim, dim, |a, b| {
                    let (ha, hb) = (self.jz_diag[a] - mean_jz, self.jz_diag[b] - mean_jz);
                    let factor = (kick * (ha + hb) - kappa_eff * self.dt * (ha * ha + hb * hb)).exp();
                    let rest = (drift.rho[(a, b)] - measured.rho[(a, b)] / n) * rest_scale;
                    rho[(a, b)] * factor + rest * kappa_dt
                })
            }
        };
        self.state.rho = next;
        self.state.hermitize();
        let trace = self.state.trace();
        let trace_drift = (trace - 1.0).abs();
        let bad = match self.integrator {
            Integrator::EulerMaruyama => trace_drift.is_nan() || trace_drift > MAX_TRACE_DRIFT,
            Integrator::Exponential => !(trace.is_finite() && trace > 0.0),
        };
        if bad {
            return Err(Error::StepSize {
                time: None,
                drift: trace_drift,
            });
        }
        self.state.scale(1.0 / trace);
        Ok(StepInfo {
            dy: 2.0 * strength * mean_jz * self.dt + dw,
            trace_drift,
        })
    }

    fn jz_moments(&self) -> (f64, f64) {
        self.jz_diag.iter().enumerate().fold((0.0, 0.0), |(m1, m2), (p, &m)| {
            let w = self.state.rho[(p, p)].re;
            (m1 + m * w, m2 + m * m * w)
        })
    }

    fn record(&self, t: f64, dy: f64) -> ObservableRecord {
        let s = &self.state;
        let ops = &*self.ops;
        let mean_jx = s.expect(&ops.jx);
        let mean_jy = s.expect(&ops.jy);
        let (mean_jz, jz2) = self.jz_moments();
        let jy2 = s.expect(&(&ops.jy * &ops.jy));
        let var_jz = jz2 - mean_jz * mean_jz;
        let denom = mean_jx * mean_jx + mean_jy * mean_jy;
        let (blocks, _) = s.project(&self.basis).expect("basis matches state");

        // Per-block moments from the projected blocks, with dense irrep matrices.
        let mut block_traces = Vec::new();
        let mut block_var_jy = Vec::new();
        for (k, irrep) in blocks.layout().irreps().iter().enumerate() {
            let b = blocks.block_matrix(k);
            let jy = crate::spinrep::irrep_operators(irrep.two_j).jy;
            let tr = b.trace().re;
            let m1 = (&jy * &b).trace().re;
            let m2 = (&jy * &jy * &b).trace().re;
            block_traces.push(tr);
            block_var_jy.push((tr > EMPTY_BLOCK_TRACE).then(|| m2 / tr - (m1 / tr).powi(2)));
        }

        ObservableRecord {
            t,
            kappa_t: self.kappa * t,
            dy,
            mean_jx,
            mean_jy,
            mean_jz,
            var_jz,
            var_jy: jy2 - mean_jy * mean_jy,
            xi2: (denom > XI2_DENOMINATOR_FLOOR).then(|| s.n_spins as f64 * var_jz / denom),
            purity: s.purity(),
            block_traces,
            block_var_jy,
        }
    }

    fn min_eigenvalue(&self) -> f64 {
        self.state.min_eigenvalue()
    }

    fn block_state(&self) -> GcsState {
        self.state.project(&self.basis).expect("basis matches state").0
    }
}
