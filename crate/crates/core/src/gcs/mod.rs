//! Generalized collective states: density operators that are uniform over the
//! degenerate copies of every total-spin irrep,
//!
//! ```text
//! ρ = ⊕_J ρ^J ⊗ 1_{d_N^J} / d_N^J
//! ```
//!
//! Each block stores the degeneracy-*aggregated* matrix
//! `ρ^J_{MM'} = Σ_i ⟨J,M,i|ρ|J,M',i⟩`. Block traces are therefore the
//! populations of the irreps directly, and the per-copy matrix is
//! `ρ^J / d_N^J`.

mod observables;
mod snapshot;

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spinrep::{self, BlockLayout, Irrep};

pub use observables::{BlockMoments, Observable, ObservableRecord, EMPTY_BLOCK_TRACE, XI2_DENOMINATOR_FLOOR};
pub use snapshot::SNAPSHOT_VERSION;

/// Block-diagonal conditional state (or a derivative of one; the same storage
/// carries `dρ/dt` for the Lindbladians).
#[derive(Debug, Clone, PartialEq)]
pub struct GcsState {
    layout: Arc<BlockLayout>,
    /// Row-major blocks, contiguous, at the offsets given by the layout.
    data: Vec<C64>,
}

fn binomial_f64(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl GcsState {
    pub fn zeros(layout: Arc<BlockLayout>) -> Self {
        let data = vec![C64::new(0.0, 0.0); layout.storage_len()];
        Self { layout, data }
    }

    /// Build from per-irrep matrices, `J` descending.
    pub fn from_blocks(layout: Arc<BlockLayout>, blocks: &[DMatrix<C64>]) -> Result<Self> {
        if blocks.len() != layout.len() {
            return Err(Error::Usage(format!(
                "{} blocks supplied for a layout with {} irreps",
                blocks.len(),
                layout.len()
            )));
        }
        let mut state = Self::zeros(layout);
        for (k, block) in blocks.iter().enumerate() {
            let dim = state.layout.irreps()[k].dim();
            if block.nrows() != dim || block.ncols() != dim {
                return Err(Error::Usage(format!(
                    "block {k} is {}x{}, expected {dim}x{dim}",
                    block.nrows(),
                    block.ncols()
                )));
            }
            let dst = state.block_mut(k);
            for a in 0..dim {
                for b in 0..dim {
                    dst[a * dim + b] = block[(a, b)];
                }
            }
        }
        Ok(state)
    }

    /// Spin coherent state along `+x`: the `J = N/2` block holds the pure
    /// state with amplitudes `2^{-N/2} sqrt(C(N, N/2 + M))`.
    pub fn coherent_x(n_spins: u32) -> Result<Self> {
        let layout = Arc::new(BlockLayout::new(n_spins)?);
        let mut state = Self::zeros(layout);
        let top = state.layout.irreps()[0];
        let norm = 2f64.powi(-(n_spins as i32));
        let probs: Vec<f64> = (0..top.dim())
            .map(|k| norm * binomial_f64(n_spins, (n_spins as i32 + top.two_m(k)) as u32 / 2))
            .collect();
        let dim = top.dim();
        let block = state.block_mut(0);
        for a in 0..dim {
            for b in 0..dim {
                let p = if a == b { probs[a] } else { (probs[a] * probs[b]).sqrt() };
                block[a * dim + b] = C64::new(p, 0.0);
            }
        }
        Ok(state)
    }

    /// Measurement steady state labelled by `M`:
    /// `(1/α_N^M) Σ_{J ≥ |M|} d_N^J |J,M⟩⟨J,M|`.
    pub fn steady_state(n_spins: u32, two_m: i32) -> Result<Self> {
        let alpha = spinrep::alpha(n_spins, two_m)? as f64;
        let layout = Arc::new(BlockLayout::new(n_spins)?);
        let mut state = Self::zeros(layout);
        for k in 0..state.layout.len() {
            let irrep = state.layout.irreps()[k];
            if let Some(a) = irrep.index_of(two_m) {
                let dim = irrep.dim();
                state.block_mut(k)[a * dim + a] = C64::new(irrep.degeneracy as f64 / alpha, 0.0);
            }
        }
        Ok(state)
    }

    /// Random degeneracy-uniform density matrix: every block is `A A†` for a
    /// complex Gaussian `A`, then the whole state is normalized.
    pub fn random<R: Rng + ?Sized>(layout: Arc<BlockLayout>, rng: &mut R) -> Self {
        let mut state = Self::zeros(layout);
        for k in 0..state.layout.len() {
            let dim = state.layout.irreps()[k].dim();
            let a = DMatrix::<C64>::from_fn(dim, dim, |_, _| {
                C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let weight: f64 = rng.random_range(0.05..1.0);
            let block = (&a * a.adjoint()).map(|z| z * weight);
            state.set_block(k, &block);
        }
        let tr = state.trace();
        state.scale(1.0 / tr);
        state
    }

    /// Random Hermitian blocks with no positivity or trace constraint.
    pub fn random_hermitian<R: Rng + ?Sized>(layout: Arc<BlockLayout>, rng: &mut R) -> Self {
        let mut state = Self::zeros(layout);
        for k in 0..state.layout.len() {
            let dim = state.layout.irreps()[k].dim();
            let a = DMatrix::<C64>::from_fn(dim, dim, |_, _| {
                C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let block = (&a + a.adjoint()).map(|z| z * 0.5);
            state.set_block(k, &block);
        }
        state
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn shared_layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn n_spins(&self) -> u32 {
        self.layout.n_spins()
    }

    pub fn irrep(&self, k: usize) -> &Irrep {
        &self.layout.irreps()[k]
    }

    pub fn block(&self, k: usize) -> &[C64] {
        let ir = self.layout.irreps()[k];
        &self.data[ir.offset..ir.offset + ir.block_len()]
    }

    pub fn block_mut(&mut self, k: usize) -> &mut [C64] {
        let ir = self.layout.irreps()[k];
        &mut self.data[ir.offset..ir.offset + ir.block_len()]
    }

    pub fn block_matrix(&self, k: usize) -> DMatrix<C64> {
        let dim = self.irrep(k).dim();
        let block = self.block(k);
        DMatrix::from_fn(dim, dim, |a, b| block[a * dim + b])
    }

    pub fn set_block(&mut self, k: usize, m: &DMatrix<C64>) {
        let dim = self.irrep(k).dim();
        assert_eq!((m.nrows(), m.ncols()), (dim, dim), "block shape");
        let dst = self.block_mut(k);
        for a in 0..dim {
            for b in 0..dim {
                dst[a * dim + b] = m[(a, b)];
            }
        }
    }

    /// Element `(M, M')` of block `k` by row indices.
    pub fn get(&self, k: usize, a: usize, b: usize) -> C64 {
        let dim = self.irrep(k).dim();
        self.block(k)[a * dim + b]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn same_layout(&self, other: &GcsState) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout
    }

    /// Real part of `Σ_J tr ρ^J`.
    pub fn trace(&self) -> f64 {
        (0..self.layout.len())
            .map(|k| {
                let dim = self.irrep(k).dim();
                let block = self.block(k);
                (0..dim).map(|a| block[a * dim + a].re).sum::<f64>()
            })
            .sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    /// Replace every block by `(ρ + ρ†) / 2`.
    pub fn hermitize(&mut self) {
        for k in 0..self.layout.len() {
            let dim = self.irrep(k).dim();
            let block = self.block_mut(k);
            for a in 0..dim {
                block[a * dim + a].im = 0.0;
                for b in a + 1..dim {
                    let avg = (block[a * dim + b] + block[b * dim + a].conj()) * 0.5;
                    block[a * dim + b] = avg;
                    block[b * dim + a] = avg.conj();
                }
            }
        }
    }

    /// Largest `|ρ_{ab} - conj(ρ_{ba})|` over all blocks.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.layout.len() {
            let dim = self.irrep(k).dim();
            let block = self.block(k);
            for a in 0..dim {
                for b in 0..dim {
                    worst = worst.max((block[a * dim + b] - block[b * dim + a].conj()).norm());
                }
            }
        }
        worst
    }

    /// Largest entrywise difference from `other`.
    pub fn max_abs_diff(&self, other: &GcsState) -> f64 {
        assert!(self.same_layout(other), "layout mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of each aggregated block.
    pub fn min_eigenvalues(&self) -> Vec<f64> {
        (0..self.layout.len())
            .map(|k| {
                // Rescale and flush negligible entries: elements near the
                // underflow limit break the solver.
                let m = self.block_matrix(k);
                let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
                if scale == 0.0 {
                    return 0.0;
                }
                let m = m.map(|z| {
                    let z = z / scale;
                    if z.norm() < 1e-150 {
                        C64::new(0.0, 0.0)
                    } else {
                        z
                    }
                });
                let min = m
                    .symmetric_eigenvalues()
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                min * scale
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coherent_state_amplitudes() {
        let one = GcsState::coherent_x(1).unwrap();
        for z in one.block(0) {
            assert!((z.re - 0.5).abs() < 1e-15 && z.im == 0.0);
        }
        for n in [1, 2, 5, 8, 60] {
            let s = GcsState::coherent_x(n).unwrap();
            assert!((s.trace() - 1.0).abs() < 1e-12);
            assert_eq!(s.block_traces()[1..].iter().sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn steady_state_rejects_bad_m() {
        assert!(GcsState::steady_state(4, 1).is_err());
        assert!(GcsState::steady_state(4, 6).is_err());
        assert!(GcsState::steady_state(3, 1).is_ok());
    }

    #[test]
    fn hermitize_is_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layout = Arc::new(BlockLayout::new(5).unwrap());
        let mut s = GcsState::zeros(layout.clone());
        for k in 0..layout.len() {
            for z in s.block_mut(k) {
                *z = C64::new(rng.random(), rng.random());
            }
        }
        s.hermitize();
        assert!(s.hermiticity_defect() < 1e-15);
        let again = {
            let mut t = s.clone();
            t.hermitize();
            t
        };
        assert_eq!(again, s);
    }

    #[test]
    fn random_states_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=9 {
            let layout = Arc::new(BlockLayout::new(n).unwrap());
            let s = GcsState::random(layout, &mut rng);
            assert!((s.trace() - 1.0).abs() < 1e-12);
            assert!(s.hermiticity_defect() < 1e-12);
            assert!(s.min_eigenvalues().iter().all(|&e| e > -1e-12));
        }
    }

    #[test]
    fn from_blocks_checks_shapes() {
        let layout = Arc::new(BlockLayout::new(2).unwrap());
        let bad = vec![DMatrix::<C64>::zeros(3, 3)];
        assert!(GcsState::from_blocks(layout.clone(), &bad).is_err());
        let bad = vec![DMatrix::<C64>::zeros(3, 3), DMatrix::<C64>::zeros(2, 2)];
        assert!(GcsState::from_blocks(layout.clone(), &bad).is_err());
        let good = vec![DMatrix::<C64>::identity(3, 3), DMatrix::<C64>::identity(1, 1)];
        let s = GcsState::from_blocks(layout, &good).unwrap();
        assert_eq!(s.trace(), 4.0);
    }
}
