use serde::Serialize;

use super::GcsState;
use crate::spinrep::raising_element;

/// Collective observables that act block-diagonally on the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Jx,
    Jy,
    Jz,
    Jx2,
    Jy2,
    Jz2,
}

/// Unnormalized moments `tr[X ρ^J]` of one aggregated block.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BlockMoments {
    pub trace: f64,
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub jx2: f64,
    pub jy2: f64,
    pub jz2: f64,
}

impl BlockMoments {
    fn get(&self, obs: Observable) -> f64 {
        match obs {
            Observable::Jx => self.jx,
            Observable::Jy => self.jy,
            Observable::Jz => self.jz,
            Observable::Jx2 => self.jx2,
            Observable::Jy2 => self.jy2,
            Observable::Jz2 => self.jz2,
        }
    }
}

/// One sample of a trajectory. `None` marks an undefined quantity (vanishing
/// squeezing denominator, empty block) and is written as such, never as NaN.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableRecord {
    /// Physical time.
    pub t: f64,
    /// Dimensionless time `κ t`.
    pub kappa_t: f64,
    /// Measurement increment over the step that ended at `t`.
    #[serde(rename = "dY")]
    pub dy: f64,
    pub mean_jx: f64,
    pub mean_jy: f64,
    pub mean_jz: f64,
    pub var_jz: f64,
    pub var_jy: f64,
    pub xi2: Option<f64>,
    pub purity: f64,
    /// `tr ρ^J`, `J` descending.
    pub block_traces: Vec<f64>,
    /// `tr[ΔJ_y² ρ^J] / tr ρ^J`, `J` descending.
    pub block_var_jy: Vec<Option<f64>>,
}

/// Squeezing denominators below this are reported as undefined.
pub const XI2_DENOMINATOR_FLOOR: f64 = 1e-12;
/// Blocks lighter than this have no reported per-block variance.
pub const EMPTY_BLOCK_TRACE: f64 = 1e-12;

impl GcsState {
    /// Moments of block `k`, using the banded structure of `J_±` and `J_±²`:
    /// `⟨J_x⟩ = Re tr[J_+ ρ]`, `⟨J_y⟩ = Im tr[J_+ ρ]`, and
    /// `J_{x,y}² = (J² - J_z² ± Re J_+²)/2` in expectation.
    pub fn block_moments(&self, k: usize) -> BlockMoments {
        let irrep = *self.irrep(k);
        let dim = irrep.dim();
        let block = self.block(k);
        let j = irrep.j();
        let mut mom = BlockMoments::default();
        let mut jplus = num_complex::Complex64::new(0.0, 0.0);
        let mut jplus2 = num_complex::Complex64::new(0.0, 0.0);
        for a in 0..dim {
            let m = irrep.m(a);
            let p = block[a * dim + a].re;
            mom.trace += p;
            mom.jz += m * p;
            mom.jz2 += m * m * p;
            if a >= 1 {
                // (J_+)_{a-1, a} ρ_{a, a-1}
                jplus += raising_element(irrep.two_j, irrep.two_m(a)) * block[a * dim + a - 1];
            }
            if a >= 2 {
                let two_m = irrep.two_m(a);
                let c = raising_element(irrep.two_j, two_m) * raising_element(irrep.two_j, two_m + 2);
                jplus2 += c * block[a * dim + a - 2];
            }
        }
        mom.jx = jplus.re;
        mom.jy = jplus.im;
        let transverse = j * (j + 1.0) * mom.trace - mom.jz2;
        mom.jx2 = 0.5 * (transverse + jplus2.re);
        mom.jy2 = 0.5 * (transverse - jplus2.re);
        mom
    }

    pub fn expectation(&self, obs: Observable) -> f64 {
        (0..self.layout.len()).map(|k| self.block_moments(k).get(obs)).sum()
    }

    /// `π[X²] - π[X]²` for `X ∈ {J_x, J_y, J_z}`.
    ///
    /// Panics if passed a squared observable.
    pub fn variance(&self, obs: Observable) -> f64 {
        let squared = match obs {
            Observable::Jx => Observable::Jx2,
            Observable::Jy => Observable::Jy2,
            Observable::Jz => Observable::Jz2,
            other => panic!("variance of {other:?} is not defined here"),
        };
        let mean = self.expectation(obs);
        self.expectation(squared) - mean * mean
    }

    /// `ξ² = N Δ²[J_z] / (π[J_x]² + π[J_y]²)`, or `None` when the mean
    /// transverse spin vanishes.
    pub fn squeezing_parameter(&self) -> Option<f64> {
        let jx = self.expectation(Observable::Jx);
        let jy = self.expectation(Observable::Jy);
        let denom = jx * jx + jy * jy;
        if denom <= XI2_DENOMINATOR_FLOOR {
            return None;
        }
        Some(self.n_spins() as f64 * self.variance(Observable::Jz) / denom)
    }

    /// `tr ρ² = Σ_J tr[(ρ^J)²] / d_N^J`.
    pub fn purity(&self) -> f64 {
        (0..self.layout.len())
            .map(|k| {
                let d = self.irrep(k).degeneracy as f64;
                self.block(k).iter().map(|z| z.norm_sqr()).sum::<f64>() / d
            })
            .sum()
    }

    pub fn block_traces(&self) -> Vec<f64> {
        (0..self.layout.len()).map(|k| self.block_moments(k).trace).collect()
    }

    /// Normalized `J_y` variance inside each block.
    pub fn per_block_jy_variance(&self) -> Vec<Option<f64>> {
        (0..self.layout.len())
            .map(|k| {
                let mom = self.block_moments(k);
                if mom.trace <= EMPTY_BLOCK_TRACE {
                    return None;
                }
                let mean = mom.jy / mom.trace;
                Some(mom.jy2 / mom.trace - mean * mean)
            })
            .collect()
    }

    /// Snapshot of every recorded observable.
    pub fn record(&self, t: f64, kappa: f64, dy: f64) -> ObservableRecord {
        let moments: Vec<_> = (0..self.layout.len()).map(|k| self.block_moments(k)).collect();
        let total = moments.iter().fold(BlockMoments::default(), |mut acc, m| {
            acc.trace += m.trace;
            acc.jx += m.jx;
            acc.jy += m.jy;
            acc.jz += m.jz;
            acc.jx2 += m.jx2;
            acc.jy2 += m.jy2;
            acc.jz2 += m.jz2;
            acc
        });
        let denom = total.jx * total.jx + total.jy * total.jy;
        let var_jz = total.jz2 - total.jz * total.jz;
        ObservableRecord {
            t,
            kappa_t: kappa * t,
            dy,
            mean_jx: total.jx,
            mean_jy: total.jy,
            mean_jz: total.jz,
            var_jz,
            var_jy: total.jy2 - total.jy * total.jy,
            xi2: (denom > XI2_DENOMINATOR_FLOOR).then(|| self.n_spins() as f64 * var_jz / denom),
            purity: self.purity(),
            block_traces: moments.iter().map(|m| m.trace).collect(),
            block_var_jy: moments
                .iter()
                .map(|m| {
                    (m.trace > EMPTY_BLOCK_TRACE).then(|| {
                        let mean = m.jy / m.trace;
                        m.jy2 / m.trace - mean * mean
                    })
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use nalgebra::DMatrix;
    use num_complex::Complex64 as C64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::spinrep::{irrep_operators, BlockLayout};

    /// tr[X ρ] with dense irrep matrices, independent of the banded formulas.
    fn dense_moment(state: &GcsState, pick: impl Fn(&crate::spinrep::IrrepOperators) -> DMatrix<C64>) -> C64 {
        (0..state.layout().len())
            .map(|k| {
                let ops = irrep_operators(state.irrep(k).two_j);
                (pick(&ops) * state.block_matrix(k)).trace()
            })
            .sum()
    }

    type DenseOp = Box<dyn Fn(&crate::spinrep::IrrepOperators) -> DMatrix<C64>>;

    #[test]
    fn banded_moments_match_dense_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=8 {
            let s = GcsState::random(Arc::new(BlockLayout::new(n).unwrap()), &mut rng);
            let cases: [(Observable, DenseOp); 6] = [
                (Observable::Jx, Box::new(|o| o.jx.clone())),
                (Observable::Jy, Box::new(|o| o.jy.clone())),
                (Observable::Jz, Box::new(|o| o.jz.clone())),
                (Observable::Jx2, Box::new(|o| &o.jx * &o.jx)),
                (Observable::Jy2, Box::new(|o| &o.jy * &o.jy)),
                (Observable::Jz2, Box::new(|o| &o.jz * &o.jz)),
            ];
            for (obs, op) in cases {
                let dense = dense_moment(&s, op);
                assert!(dense.im.abs() < 1e-12);
                assert!((dense.re - s.expectation(obs)).abs() < 1e-12, "N={n} {obs:?}");
            }
        }
    }

    #[test]
    fn coherent_state_moments() {
        let s = GcsState::coherent_x(60).unwrap();
        assert!((s.expectation(Observable::Jx) - 30.0).abs() < 1e-10);
        assert!(s.expectation(Observable::Jy).abs() < 1e-12);
        assert!(s.expectation(Observable::Jz).abs() < 1e-10);
        assert!((s.variance(Observable::Jz) - 15.0).abs() < 1e-9);
        assert!((s.variance(Observable::Jy) - 15.0).abs() < 1e-9);
        assert!((s.expectation(Observable::Jx2) - 900.0).abs() < 1e-8);
        assert!((s.squeezing_parameter().unwrap() - 1.0).abs() < 1e-12);
        assert!((s.purity() - 1.0).abs() < 1e-12);

        let one = GcsState::coherent_x(1).unwrap();
        assert!((one.variance(Observable::Jz) - 0.25).abs() < 1e-15);

        for n in 1..=12 {
            let s = GcsState::coherent_x(n).unwrap();
            let nf = n as f64;
            assert!((s.expectation(Observable::Jx2) - nf * nf / 4.0).abs() < 1e-10);
            assert!((s.squeezing_parameter().unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn steady_state_observables() {
        let s0 = GcsState::steady_state(4, 0).unwrap();
        assert!((s0.purity() - 1.0 / 6.0).abs() < 1e-15);
        assert!(s0.variance(Observable::Jz).abs() < 1e-15);
        let traces = s0.block_traces();
        let want = [1.0 / 6.0, 3.0 / 6.0, 2.0 / 6.0];
        for (got, want) in traces.iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(s0.squeezing_parameter(), None);

        let s1 = GcsState::steady_state(4, 2).unwrap();
        assert!((s1.expectation(Observable::Jz) - 1.0).abs() < 1e-15);
        assert!((s1.purity() - 0.25).abs() < 1e-15);

        let s2 = GcsState::steady_state(4, 4).unwrap();
        assert!((s2.purity() - 1.0).abs() < 1e-15);

        let half = GcsState::steady_state(1, -1).unwrap();
        assert!((half.purity() - 1.0).abs() < 1e-15);
        assert!((half.expectation(Observable::Jz) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn per_block_variances() {
        let css = GcsState::coherent_x(10).unwrap();
        let v = css.per_block_jy_variance();
        assert!((v[0].unwrap() - 2.5).abs() < 1e-12);
        assert!(v[1..].iter().all(Option::is_none));

        // |2,2>: (J(J+1) - M^2)/2 = 1
        let top = GcsState::steady_state(4, 4).unwrap();
        assert!((top.per_block_jy_variance()[0].unwrap() - 1.0).abs() < 1e-15);

        let half = GcsState::steady_state(1, 1).unwrap();
        assert!((half.per_block_jy_variance()[0].unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn record_marks_undefined_values() {
        let s = GcsState::steady_state(4, 0).unwrap();
        let rec = s.record(1.0, 2.0, 0.1);
        assert_eq!(rec.kappa_t, 2.0);
        assert_eq!(rec.xi2, None);
        assert_eq!(rec.block_var_jy.len(), 3);
        let sum: f64 = rec.block_traces.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains("\"xi2\":null"));
        assert!(!json.contains("NaN"));
    }
}
