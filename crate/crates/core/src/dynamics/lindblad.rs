//! State-side (Schrödinger picture) dissipators of the two measurement models.
//!
//! Collective: `L^C ρ = J_z ρ J_z - ½{J_z², ρ}`, diagonal in `(M, M')`.
//!
//! Symmetric: `L^S ρ = Σ_n j_z^(n) ρ j_z^(n) - ½{j_z^(n)², ρ}
//!                  = Σ_n j_z^(n) ρ j_z^(n) - (N/4) ρ`.
//! The single-site operators are not collective, but on degeneracy-uniform
//! states the sandwich term only couples `J` to `J` and `J ± 1` at equal
//! `(M, M')`. Splitting off one spin, `J = K ± 1/2` with `K` a total spin of
//! the other `N - 1`, the projection theorem gives the matrix elements of that
//! spin's `j_z`, and permutation symmetry turns the sum over sites into a
//! factor `N`:
//!
//! ```text
//! (Σ_n j_n ρ j_n)^J_{MM'} = Σ_{J'} Q^{J,J'}_{MM'} ρ^{J'}_{MM'} / d_N^{J'}
//! Q^{J,J}     = N M M' [ d_{N-1}^{J-1/2} / 4J² + d_{N-1}^{J+1/2} / 4(J+1)² ]
//! Q^{J-1,J}   = N d_{N-1}^{J-1/2} sqrt((J²-M²)(J²-M'²)) / 4J²
//! Q^{J+1,J}   = N d_{N-1}^{J+1/2} sqrt(((J+1)²-M²)((J+1)²-M'²)) / 4(J+1)²
//! ```
//!
//! Every coefficient is a product `w_M w_{M'}`, so the tables store one
//! weight vector per (target, source) pair with the `1/d_N^{J'}` folded in.
//! The oracle module checks these tables against the literal per-site sum.

use crate::error::{Error, Result};
use crate::gcs::GcsState;
use crate::spinrep::{degeneracy_or_zero, BlockLayout};

/// `L^C ρ`, block by block: `(L^C ρ)_{MM'} = -½ (M - M')² ρ_{MM'}`.
pub fn lindblad_collective(state: &GcsState) -> GcsState {
    let mut out = state.clone();
    for k in 0..state.layout().len() {
        let irrep = *state.irrep(k);
        let dim = irrep.dim();
        let block = out.block_mut(k);
        for a in 0..dim {
            for b in 0..dim {
                let dm = b as f64 - a as f64; // M_a - M_b
                block[a * dim + b] *= -0.5 * dm * dm;
            }
        }
    }
    out
}

/// Precomputed weights realizing `L^S` on aggregated blocks of one layout.
#[derive(Debug, Clone)]
pub struct SymmetricCoefficients {
    layout: BlockLayout,
    /// Per target irrep, weights for the same-`J` term, indexed by row.
    stay: Vec<Vec<f64>>,
    /// Per target irrep `J`, weights for the source `J + 1` (target row `a`
    /// reads source row `a + 1`). Empty for the top irrep.
    from_above: Vec<Vec<f64>>,
    /// Per target irrep `J`, weights for the source `J - 1` (target row `a`
    /// reads source row `a - 1`; rows with `|M| = J` have weight zero).
    from_below: Vec<Vec<f64>>,
    /// `N / 4`, the loss rate of every element.
    loss: f64,
}

impl SymmetricCoefficients {
    pub fn build(layout: &BlockLayout) -> Self {
        let n = layout.n_spins();
        let nf = n as f64;
        let d_sub = |two_k: i64| degeneracy_or_zero(n - 1, two_k) as f64;

        let mut stay = Vec::with_capacity(layout.len());
        let mut from_above = Vec::with_capacity(layout.len());
        let mut from_below = Vec::with_capacity(layout.len());

        for (k, irrep) in layout.irreps().iter().enumerate() {
            let two_j = irrep.two_j as i64;
            let j = irrep.j();
            let d_here = irrep.degeneracy as f64;

            // Q^{J,J}: the d_{N-1}^{J-1/2}/4J² term vanishes with its
            // numerator at J = 0.
            let lower = d_sub(two_j - 1);
            let upper = d_sub(two_j + 1);
            let mut c = 0.0;
            if irrep.two_j == 0 {
                assert_eq!(lower, 0.0, "d_(N-1)^(-1/2) must vanish");
            } else {
                c += lower / (4.0 * j * j);
            }
            c += upper / (4.0 * (j + 1.0) * (j + 1.0));
            let scale = (nf * c / d_here).sqrt();
            stay.push((0..irrep.dim()).map(|a| scale * irrep.m(a)).collect());

            // Source J + 1 (one irrep up) feeding target J.
            if k == 0 {
                from_above.push(Vec::new());
            } else {
                let src = layout.irreps()[k - 1];
                let js = src.j();
                let coeff = nf * d_sub(src.two_j as i64 - 1) / (4.0 * js * js) / src.degeneracy as f64;
                from_above.push(
                    (0..irrep.dim())
                        .map(|a| {
                            let m = irrep.m(a);
                            (coeff * (js * js - m * m)).max(0.0).sqrt()
                        })
                        .collect(),
                );
            }

            // Source J - 1 feeding target J.
            if k + 1 == layout.len() {
                from_below.push(Vec::new());
            } else {
                let src = layout.irreps()[k + 1];
                let coeff = nf * d_sub(src.two_j as i64 + 1) / (4.0 * j * j) / src.degeneracy as f64;
                from_below.push(
                    (0..irrep.dim())
                        .map(|a| {
                            let m = irrep.m(a);
                            (coeff * (j * j - m * m)).max(0.0).sqrt()
                        })
                        .collect(),
                );
            }
        }
        Self {
            layout: layout.clone(),
            stay,
            from_above,
            from_below,
            loss: nf / 4.0,
        }
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn stay(&self, k: usize) -> &[f64] {
        &self.stay[k]
    }

    pub fn from_above(&self, k: usize) -> &[f64] {
        &self.from_above[k]
    }

    pub fn from_below(&self, k: usize) -> &[f64] {
        &self.from_below[k]
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    /// `Q^{J,J}_{MM'}` for irrep `k`, rows `a`, `b`.
    pub fn q_stay(&self, k: usize, a: usize, b: usize) -> f64 {
        let d = self.layout.irreps()[k].degeneracy as f64;
        self.stay[k][a] * self.stay[k][b] * d
    }

    /// `Q^{J-1,J}_{MM'}`: weight flowing from irrep `k` down to irrep `k + 1`,
    /// indexed by the *source* rows `a`, `b` of irrep `k`.
    pub fn q_down(&self, k: usize, a: usize, b: usize) -> f64 {
        if k + 1 >= self.layout.len() || a == 0 || b == 0 {
            return 0.0;
        }
        let d = self.layout.irreps()[k].degeneracy as f64;
        let w = &self.from_above[k + 1];
        match (w.get(a - 1), w.get(b - 1)) {
            (Some(x), Some(y)) => x * y * d,
            _ => 0.0,
        }
    }

    /// `Q^{J+1,J}_{MM'}`: weight flowing from irrep `k` up to irrep `k - 1`,
    /// indexed by the source rows of irrep `k`.
    pub fn q_up(&self, k: usize, a: usize, b: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let d = self.layout.irreps()[k].degeneracy as f64;
        let w = &self.from_below[k - 1];
        w[a + 1] * w[b + 1] * d
    }

    pub(crate) fn check_layout(&self, state: &GcsState) -> Result<()> {
        if *state.layout() != self.layout {
            return Err(Error::Usage(format!(
                "symmetric coefficients built for N = {}, state has N = {}",
                self.layout.n_spins(),
                state.n_spins()
            )));
        }
        Ok(())
    }

    /// Element `(a, b)` of `(L^S ρ)` in target irrep `k`.
    #[inline]
    pub(crate) fn apply_element(&self, src: &GcsState, k: usize, a: usize, b: usize) -> num_complex::Complex64 {
        let dim = src.irrep(k).dim();
        let here = src.block(k);
        let stay = &self.stay[k];
        let mut acc = here[a * dim + b] * (stay[a] * stay[b] - self.loss);
        let above = &self.from_above[k];
        if !above.is_empty() {
            let sdim = dim + 2;
            acc += src.block(k - 1)[(a + 1) * sdim + b + 1] * (above[a] * above[b]);
        }
        let below = &self.from_below[k];
        if !below.is_empty() && a >= 1 && b >= 1 && a + 1 < dim && b + 1 < dim {
            let sdim = dim - 2;
            acc += src.block(k + 1)[(a - 1) * sdim + b - 1] * (below[a] * below[b]);
        }
        acc
    }
}

/// `L^S ρ` on aggregated blocks.
pub fn lindblad_symmetric(state: &GcsState, coeffs: &SymmetricCoefficients) -> Result<GcsState> {
    coeffs.check_layout(state)?;
    let mut out = GcsState::zeros(state.shared_layout().clone());
    for k in 0..state.layout().len() {
        let dim = state.irrep(k).dim();
        for a in 0..dim {
            for b in 0..dim {
                let v = coeffs.apply_element(state, k, a, b);
                out.block_mut(k)[a * dim + b] = v;
            }
        }
    }
    Ok(out)
}
