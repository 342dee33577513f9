//! One step of the state-side quantum filter
//!
//! ```text
//! dρ = κ L(ρ) dt + sqrt(κ_eff) (J_z ρ + ρ J_z - 2 π[J_z] ρ) dW
//! dY = 2 sqrt(κ_eff) π[J_z] dt + dW
//! ```
//!
//! with `κ_eff = κ` for the collective model and `κ/N` for the symmetric one.
//! Two discretizations are available (see [`Integrator`]). After the update
//! the state is Hermitized and renormalized.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lindblad::SymmetricCoefficients;
use super::ModelKind;
use crate::error::{Error, Result};
use crate::gcs::GcsState;

/// Per-step trace drift above which an Euler-Maruyama step is rejected.
pub const MAX_TRACE_DRIFT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Additive Euler-Maruyama update of the equation above.
    #[default]
    EulerMaruyama,
    /// The measured part `κ_eff D[J_z]` plus back-action is applied as the
    /// exact multiplicative factor
    /// `ρ_{MM'} ← exp(sqrt(κ_eff)(h + h') dW - κ_eff (h² + h'²) dt) ρ_{MM'}`,
    /// `h = M - π[J_z]`; the remaining dissipator `κ L - κ_eff L^C` (zero for
    /// the collective model) takes an Euler step. Positivity and purity of
    /// collective trajectories are preserved exactly. Trace drift is part of
    /// the scheme here and is reported but not checked.
    Exponential,
}

impl FromStr for Integrator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "euler_maruyama" | "euler" => Ok(Integrator::EulerMaruyama),
            "exponential" => Ok(Integrator::Exponential),
            other => Err(format!("unknown integrator `{other}` (expected euler_maruyama | exponential)")),
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::EulerMaruyama => "euler_maruyama",
            Integrator::Exponential => "exponential",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Measurement record increment for this step.
    pub dy: f64,
    /// `|tr ρ' - 1|` before renormalization.
    pub trace_drift: f64,
}

/// `(π[J_z], π[J_z²])` from the block diagonals.
pub(crate) fn jz_moments(state: &GcsState) -> (f64, f64) {
    let mut mean = 0.0;
    let mut second = 0.0;
    for k in 0..state.layout().len() {
        let irrep = *state.irrep(k);
        let dim = irrep.dim();
        let block = state.block(k);
        for a in 0..dim {
            let m = irrep.m(a);
            let p = block[a * dim + a].re;
            mean += m * p;
            second += m * m * p;
        }
    }
    (mean, second)
}

/// Writes the updated (normalized) state into `out`, which must share the
/// layout of `state`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_into(
    state: &GcsState,
    out: &mut GcsState,
    model: ModelKind,
    integrator: Integrator,
    coeffs: Option<&SymmetricCoefficients>,
    kappa: f64,
    dt: f64,
    dw: f64,
) -> Result<StepInfo> {
    let n = state.n_spins() as f64;
    let (mean_jz, _) = jz_moments(state);
    let kappa_eff = model.measurement_strength(kappa, n);
    let strength = kappa_eff.sqrt();
    let kappa_dt = kappa * dt;
    let kick = strength * dw;

    let coeffs = match model {
        ModelKind::Collective => None,
        ModelKind::Symmetric => {
            let c = coeffs.ok_or_else(|| {
                Error::Usage("symmetric model needs SymmetricCoefficients".into())
            })?;
            c.check_layout(state)?;
            Some(c)
        }
    };

    for k in 0..state.layout().len() {
        let irrep = *state.irrep(k);
        let dim = irrep.dim();
        let two_j = irrep.two_j as f64;
        let src = state.block(k);
        let dst = out.block_mut(k);
        for a in 0..dim {
            let ma = (two_j - 2.0 * a as f64) / 2.0;
            for b in 0..dim {
                let mb = (two_j - 2.0 * b as f64) / 2.0;
                let rho = src[a * dim + b];
                let dephasing = -0.5 * (ma - mb) * (ma - mb);
                dst[a * dim + b] = match integrator {
                    Integrator::EulerMaruyama => {
                        let drift = match coeffs {
                            None => rho * dephasing,
                            Some(c) => c.apply_element(state, k, a, b),
                        };
                        rho + drift * kappa_dt + rho * (kick * (ma + mb - 2.0 * mean_jz))
                    }
                    Integrator::Exponential => {
                        let (ha, hb) = (ma - mean_jz, mb - mean_jz);
                        let factor = (kick * (ha + hb) - kappa_eff * dt * (ha * ha + hb * hb)).exp();
                        let rest = match coeffs {
                            None => num_complex::Complex64::new(0.0, 0.0),
                            Some(c) => c.apply_element(state, k, a, b) - rho * (dephasing / n),
                        };
                        rho * factor + rest * kappa_dt
                    }
                };
            }
        }
    }

    out.hermitize();
    let trace = out.trace();
    let trace_drift = (trace - 1.0).abs();
    let bad = match integrator {
        Integrator::EulerMaruyama => trace_drift.is_nan() || trace_drift > MAX_TRACE_DRIFT,
        Integrator::Exponential => !(trace.is_finite() && trace > 0.0),
    };
    if bad {
        return Err(Error::StepSize {
            time: None,
            drift: trace_drift,
        });
    }
    out.scale(1.0 / trace);
    Ok(StepInfo {
        dy: 2.0 * strength * mean_jz * dt + dw,
        trace_drift,
    })
}

/// One Euler-Maruyama filter step. `noise_increment` is the innovation
/// `dW ~ Normal(0, dt)`, drawn by the caller; `coeffs` is required for the
/// symmetric model.
pub fn filter_step(
    state: &GcsState,
    model: ModelKind,
    coeffs: Option<&SymmetricCoefficients>,
    kappa: f64,
    dt: f64,
    noise_increment: f64,
) -> Result<(GcsState, StepInfo)> {
    filter_step_with(state, model, Integrator::EulerMaruyama, coeffs, kappa, dt, noise_increment)
}

/// [`filter_step`] with an explicit integrator.
pub fn filter_step_with(
    state: &GcsState,
    model: ModelKind,
    integrator: Integrator,
    coeffs: Option<&SymmetricCoefficients>,
    kappa: f64,
    dt: f64,
    noise_increment: f64,
) -> Result<(GcsState, StepInfo)> {
    let mut out = GcsState::zeros(state.shared_layout().clone());
    let info = step_into(state, &mut out, model, integrator, coeffs, kappa, dt, noise_increment)?;
    Ok((out, info))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcs::Observable;

    #[test]
    fn collective_eigenstate_is_fixed_point() {
        for n in [1u32, 4, 7] {
            let mut two_m = -(n as i32);
            while two_m <= n as i32 {
                // |N/2, M⟩ is the steady state with M = ±N/2 only; build it directly.
                let mut s = GcsState::zeros(std::sync::Arc::new(crate::spinrep::BlockLayout::new(n).unwrap()));
                let a = s.irrep(0).index_of(two_m).unwrap();
                let dim = n as usize + 1;
                s.block_mut(0)[a * dim + a] = num_complex::Complex64::new(1.0, 0.0);
                let (next, info) = filter_step(&s, ModelKind::Collective, None, 1.0, 1e-3, 0.0).unwrap();
                assert!(next.max_abs_diff(&s) < 1e-15);
                assert!(info.trace_drift < 1e-15);
                let m = two_m as f64 / 2.0;
                assert!((info.dy - 2.0 * m * 1e-3).abs() < 1e-15);
                two_m += 2;
            }
        }
    }

    #[test]
    fn symmetric_steady_state_is_fixed_point() {
        for n in 1..=8u32 {
            let coeffs = SymmetricCoefficients::build(&crate::spinrep::BlockLayout::new(n).unwrap());
            let mut two_m = -(n as i32);
            while two_m <= n as i32 {
                let s = GcsState::steady_state(n, two_m).unwrap();
                let (next, _) = filter_step(&s, ModelKind::Symmetric, Some(&coeffs), 25.0, 4e-5, 0.0).unwrap();
                assert!(next.max_abs_diff(&s) < 1e-9);
                // Also with noise: the measurement term annihilates a J_z eigenstate mixture.
                let (next, _) = filter_step(&s, ModelKind::Symmetric, Some(&coeffs), 25.0, 4e-5, 0.01).unwrap();
                assert!(next.max_abs_diff(&s) < 1e-9);
                two_m += 2;
            }
        }
    }

    #[test]
    fn mean_jz_update_follows_variance() {
        let n = 8u32;
        let css = GcsState::coherent_x(n).unwrap();
        let coeffs = SymmetricCoefficients::build(css.layout());
        let var = css.variance(Observable::Jz);
        let (kappa, dt) = (1.0, 1e-4);
        for dw in [0.01, -0.005, 0.002] {
            for model in [ModelKind::Collective, ModelKind::Symmetric] {
                let (next, info) = filter_step(&css, model, Some(&coeffs), kappa, dt, dw).unwrap();
                let strength = model.measurement_strength(kappa, n as f64).sqrt();
                let innovation = info.dy - 2.0 * strength * css.expectation(Observable::Jz) * dt;
                let want = 2.0 * strength * var * innovation;
                let got = next.expectation(Observable::Jz) - css.expectation(Observable::Jz);
                assert!((got - want).abs() < 10.0 * dt * want.abs().max(dt), "{model:?} {got} {want}");
            }
        }
    }

    #[test]
    fn symmetric_needs_coefficients() {
        let css = GcsState::coherent_x(3).unwrap();
        assert!(filter_step(&css, ModelKind::Symmetric, None, 1.0, 1e-3, 0.0).is_err());
    }

    #[test]
    fn oversized_step_is_rejected() {
        // Both generators are trace-free, so drift only comes from an input
        // that was not normalized.
        let mut s = GcsState::coherent_x(20).unwrap();
        s.scale(1.01);
        let err = filter_step(&s, ModelKind::Collective, None, 1.0, 1e-3, 0.0).unwrap_err();
        assert!(matches!(err, Error::StepSize { .. }));
    }

    #[test]
    fn exponential_scheme_fixed_points() {
        for n in 1..=8u32 {
            let coeffs = SymmetricCoefficients::build(&crate::spinrep::BlockLayout::new(n).unwrap());
            let mut two_m = -(n as i32);
            while two_m <= n as i32 {
                let s = GcsState::steady_state(n, two_m).unwrap();
                for model in [ModelKind::Collective, ModelKind::Symmetric] {
                    for dw in [0.0, 0.03] {
                        let (next, _) =
                            filter_step_with(&s, model, Integrator::Exponential, Some(&coeffs), 25.0, 4e-5, dw).unwrap();
                        assert!(next.max_abs_diff(&s) < 1e-9);
                    }
                }
                two_m += 2;
            }
        }
    }

    #[test]
    fn exponential_scheme_keeps_collective_states_pure() {
        let mut s = GcsState::coherent_x(12).unwrap();
        let mut noise = crate::dynamics::gaussian_increments(5, 0, 1e-3);
        for _ in 0..500 {
            let dw = noise.next().unwrap();
            s = filter_step_with(&s, ModelKind::Collective, Integrator::Exponential, None, 1.0, 1e-3, dw).unwrap().0;
        }
        assert!((s.purity() - 1.0).abs() < 1e-12);
        assert!(s.min_eigenvalues()[0] > -1e-12);
    }

    #[test]
    fn schemes_agree_to_first_order() {
        let n = 8u32;
        let css = GcsState::coherent_x(n).unwrap();
        let coeffs = SymmetricCoefficients::build(css.layout());
        let dt: f64 = 1e-6;
        // With dW² = dt the two updates differ at O(dt^{3/2}).
        for model in [ModelKind::Collective, ModelKind::Symmetric] {
            for dw in [dt.sqrt(), -dt.sqrt()] {
                let (a, _) = filter_step_with(&css, model, Integrator::EulerMaruyama, Some(&coeffs), 1.0, dt, dw).unwrap();
                let (b, _) = filter_step_with(&css, model, Integrator::Exponential, Some(&coeffs), 1.0, dt, dw).unwrap();
                let change = a.max_abs_diff(&css);
                assert!(a.max_abs_diff(&b) < 1e-2 * change, "{model:?} {dw}: {} vs {change}", a.max_abs_diff(&b));
            }
        }
    }
}
