//! Angular-momentum bookkeeping for `N` spin-1/2 particles.
//!
//! The collective Hilbert space `(C^2)^{⊗N}` splits into total-spin irreps
//! `J = N/2, N/2 - 1, ..., 0 or 1/2`, each occurring `d_N^J` times. Every `J`
//! and `M` in this crate is carried as a doubled integer (`two_j = 2J`,
//! `two_m = 2M`) so that odd `N` stays exact; conversion to `f64` happens only
//! inside matrix-element formulas.
//!
//! Within an irrep the basis is `|J, M⟩` with `M` *descending*: row/column `k`
//! of any block holds `M = J - k`, i.e. `two_m = two_j - 2k`.

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Largest supported ensemble. Degeneracies and the `2^N` dimension count
/// are kept exact in `u128`, which holds `2^N` up to here.
pub const MAX_SPINS: u32 = 120;

fn factorial(n: u32) -> BigUint {
    (1..=n).fold(BigUint::from(1u32), |acc, k| acc * k)
}

fn check_j(n_spins: u32, two_j: u32) -> Result<()> {
    if two_j > n_spins || !(n_spins - two_j).is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "2J = {two_j} is not a valid total spin for N = {n_spins}"
        )));
    }
    Ok(())
}

/// Number of copies `d_N^J = N!(2J+1) / ((N/2-J)! (N/2+J+1)!)` of the
/// spin-`J` irrep in `N` spin-1/2 particles, evaluated exactly.
pub fn degeneracy(n_spins: u32, two_j: u32) -> Result<u128> {
    check_j(n_spins, two_j)?;
    let lower = (n_spins - two_j) / 2; // N/2 - J
    let upper = (n_spins + two_j) / 2 + 1; // N/2 + J + 1
    let num = factorial(n_spins) * (two_j + 1);
    let den = factorial(lower) * factorial(upper);
    let d = num / den;
    u128::try_from(d).map_err(|_| Error::Capacity {
        what: "n_spins (degeneracy overflow)",
        requested: n_spins as usize,
        max: MAX_SPINS as usize,
    })
}

/// Degeneracy with the convention `d_N^J = 0` for any `J` that does not occur.
/// Used by the symmetric-coupling tables, where `J ± 1/2` may fall off the end.
pub(crate) fn degeneracy_or_zero(n_spins: u32, two_j: i64) -> u128 {
    if two_j < 0 {
        return 0;
    }
    degeneracy(n_spins, two_j as u32).unwrap_or(0)
}

/// Cumulative degeneracy `α_N^M = Σ_{J ≥ |M|} d_N^J`. The inverse of this is
/// the purity of the measurement steady state labelled by `M`.
pub fn alpha(n_spins: u32, two_m: i32) -> Result<u128> {
    let abs_m = two_m.unsigned_abs();
    if abs_m > n_spins || !(n_spins - abs_m).is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "2M = {two_m} is not a valid projection for N = {n_spins}"
        )));
    }
    let mut total = 0u128;
    let mut two_j = abs_m;
    while two_j <= n_spins {
        total += degeneracy(n_spins, two_j)?;
        two_j += 2;
    }
    Ok(total)
}

/// One total-spin sector of the layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Irrep {
    pub two_j: u32,
    pub degeneracy: u128,
    /// Offset of this irrep's `(2J+1)^2` block in contiguous block storage.
    pub offset: usize,
}

impl Irrep {
    pub fn dim(&self) -> usize {
        self.two_j as usize + 1
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    /// `M` value of row `k`.
    pub fn m(&self, k: usize) -> f64 {
        (self.two_j as f64 - 2.0 * k as f64) / 2.0
    }

    pub fn two_m(&self, k: usize) -> i32 {
        self.two_j as i32 - 2 * k as i32
    }

    /// Row index of `two_m`, if it lies inside this irrep.
    pub fn index_of(&self, two_m: i32) -> Option<usize> {
        let two_j = self.two_j as i32;
        if two_m.abs() > two_j || (two_j - two_m) % 2 != 0 {
            return None;
        }
        Some(((two_j - two_m) / 2) as usize)
    }

    pub fn block_len(&self) -> usize {
        self.dim() * self.dim()
    }
}

/// The irreps of `N` spin-1/2 particles, `J` descending, with storage offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    n_spins: u32,
    irreps: Vec<Irrep>,
    storage_len: usize,
}

impl BlockLayout {
    pub fn new(n_spins: u32) -> Result<Self> {
        if n_spins == 0 || n_spins > MAX_SPINS {
            return Err(Error::Capacity {
                what: "n_spins",
                requested: n_spins as usize,
                max: MAX_SPINS as usize,
            });
        }
        let mut irreps = Vec::new();
        let mut offset = 0;
        let mut two_j = n_spins as i64;
        while two_j >= 0 {
            let irrep = Irrep {
                two_j: two_j as u32,
                degeneracy: degeneracy(n_spins, two_j as u32)?,
                offset,
            };
            offset += irrep.block_len();
            irreps.push(irrep);
            two_j -= 2;
        }
        let layout = Self {
            n_spins,
            irreps,
            storage_len: offset,
        };
        let dim: u128 = layout
            .irreps
            .iter()
            .map(|ir| ir.degeneracy * ir.dim() as u128)
            .sum();
        if dim != 1u128 << n_spins {
            return Err(Error::Domain(format!(
                "dimension count {dim} != 2^{n_spins} for N = {n_spins}"
            )));
        }
        Ok(layout)
    }

    pub fn n_spins(&self) -> u32 {
        self.n_spins
    }

    pub fn irreps(&self) -> &[Irrep] {
        &self.irreps
    }

    pub fn len(&self) -> usize {
        self.irreps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.irreps.is_empty()
    }

    /// Total number of stored complex entries, `Σ_J (2J+1)^2`. This is
    /// `O(N^3)`: 39 711 entries at `N = 60`, about 620 kB.
    pub fn storage_len(&self) -> usize {
        self.storage_len
    }

    /// Position of `two_j` in [`Self::irreps`].
    pub fn index_of(&self, two_j: u32) -> Option<usize> {
        if two_j > self.n_spins || !(self.n_spins - two_j).is_multiple_of(2) {
            return None;
        }
        Some(((self.n_spins - two_j) / 2) as usize)
    }

    pub fn irrep(&self, two_j: u32) -> Option<&Irrep> {
        self.index_of(two_j).map(|k| &self.irreps[k])
    }
}

/// Spin matrices of one irrep in the `|J, M⟩` basis, `M` descending.
#[derive(Debug, Clone)]
pub struct IrrepOperators {
    pub two_j: u32,
    pub jz: DMatrix<C64>,
    pub jplus: DMatrix<C64>,
    pub jminus: DMatrix<C64>,
    pub jx: DMatrix<C64>,
    pub jy: DMatrix<C64>,
}

/// `⟨J, M+1| J_+ |J, M⟩ = sqrt(J(J+1) - M(M+1))`.
pub fn raising_element(two_j: u32, two_m: i32) -> f64 {
    let j = two_j as f64 / 2.0;
    let m = two_m as f64 / 2.0;
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

pub fn irrep_operators(two_j: u32) -> IrrepOperators {
    let irrep = Irrep {
        two_j,
        degeneracy: 1,
        offset: 0,
    };
    let dim = irrep.dim();
    let jz = DMatrix::from_fn(dim, dim, |a, b| {
        if a == b {
            C64::new(irrep.m(a), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    // Row a-1 holds M+1 when row a holds M.
    let jplus = DMatrix::from_fn(dim, dim, |a, b| {
        if a + 1 == b {
            C64::new(raising_element(two_j, irrep.two_m(b)), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let jminus = jplus.adjoint();
    let jx = (&jplus + &jminus).map(|z| z * 0.5);
    let jy = (&jplus - &jminus).map(|z| z / C64::new(0.0, 2.0));
    IrrepOperators {
        two_j,
        jz,
        jplus,
        jminus,
        jx,
        jy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Branching-diagram count: d_N^J = d_{N-1}^{J-1/2} + d_{N-1}^{J+1/2}.
    fn branching_table(n_max: u32) -> Vec<Vec<u128>> {
        // table[n][two_j]
        let mut table = vec![vec![0u128; n_max as usize + 2]; n_max as usize + 1];
        table[0][0] = 1;
        for n in 1..=n_max as usize {
            for two_j in 0..=n {
                let from_below = if two_j >= 1 { table[n - 1][two_j - 1] } else { 0 };
                let from_above = table[n - 1][two_j + 1];
                table[n][two_j] = from_below + from_above;
            }
        }
        table
    }

    #[test]
    fn small_degeneracies() {
        assert_eq!(degeneracy(4, 4).unwrap(), 1);
        assert_eq!(degeneracy(4, 2).unwrap(), 3);
        assert_eq!(degeneracy(4, 0).unwrap(), 2);
        assert_eq!(degeneracy(3, 1).unwrap(), 2);
        assert_eq!(degeneracy(1, 1).unwrap(), 1);
    }

    #[test]
    fn degeneracy_rejects_bad_j() {
        assert!(matches!(degeneracy(4, 1), Err(Error::Domain(_))));
        assert!(matches!(degeneracy(4, 6), Err(Error::Domain(_))));
        assert!(matches!(degeneracy(3, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn closed_form_matches_branching_recursion() {
        let table = branching_table(20);
        for n in 1..=20u32 {
            let mut two_j = n as i64;
            while two_j >= 0 {
                assert_eq!(
                    degeneracy(n, two_j as u32).unwrap(),
                    table[n as usize][two_j as usize],
                    "N={n} 2J={two_j}"
                );
                two_j -= 2;
            }
        }
    }

    #[test]
    fn dimension_sum_rule() {
        for n in 1..=30u32 {
            let layout = BlockLayout::new(n).unwrap();
            let dim: u128 = layout
                .irreps()
                .iter()
                .map(|ir| (ir.two_j as u128 + 1) * ir.degeneracy)
                .sum();
            assert_eq!(dim, 1u128 << n);
        }
    }

    #[test]
    fn degeneracy_grows_with_n() {
        for n in 1..=24u32 {
            let mut two_j = n as i64 - 2;
            while two_j >= 0 {
                let now = degeneracy(n, two_j as u32).unwrap();
                let later = degeneracy(n + 2, two_j as u32).unwrap();
                assert!(later > now, "N={n} 2J={two_j}");
                two_j -= 2;
            }
        }
    }

    #[test]
    fn alpha_values() {
        assert_eq!(alpha(4, 4).unwrap(), 1);
        assert_eq!(alpha(4, 2).unwrap(), 4);
        assert_eq!(alpha(4, 0).unwrap(), 6);
        assert_eq!(alpha(4, -2).unwrap(), 4);
        assert_eq!(alpha(1, 1).unwrap(), 1);
        assert!(alpha(4, 1).is_err());
        assert!(alpha(4, 6).is_err());
    }

    #[test]
    fn layouts() {
        let l2 = BlockLayout::new(2).unwrap();
        let js: Vec<_> = l2.irreps().iter().map(|i| (i.two_j, i.degeneracy)).collect();
        assert_eq!(js, vec![(2, 1), (0, 1)]);
        assert_eq!(l2.storage_len(), 10);

        let l3 = BlockLayout::new(3).unwrap();
        let js: Vec<_> = l3.irreps().iter().map(|i| (i.two_j, i.degeneracy)).collect();
        assert_eq!(js, vec![(3, 1), (1, 2)]);

        let l10 = BlockLayout::new(10).unwrap();
        assert_eq!(l10.len(), 6);
        assert_eq!(l10.irreps()[0].two_j, 10);
        assert_eq!(l10.irreps()[5].two_j, 0);

        assert_eq!(BlockLayout::new(60).unwrap().storage_len(), 39_711);
        assert!(BlockLayout::new(MAX_SPINS).is_ok());
        assert!(matches!(BlockLayout::new(MAX_SPINS + 1), Err(Error::Capacity { .. })));
        assert!(BlockLayout::new(0).is_err());
    }

    #[test]
    fn row_indexing() {
        let ir = BlockLayout::new(3).unwrap().irreps()[0];
        assert_eq!(ir.two_m(0), 3);
        assert_eq!(ir.two_m(3), -3);
        assert_eq!(ir.index_of(-1), Some(2));
        assert_eq!(ir.index_of(0), None);
        assert_eq!(ir.index_of(5), None);
    }

    fn max_abs(m: &DMatrix<C64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn spin_half_and_one() {
        let half = irrep_operators(1);
        assert_eq!(half.jz[(0, 0)].re, 0.5);
        assert_eq!(half.jz[(1, 1)].re, -0.5);
        let one = irrep_operators(2);
        assert!((one.jplus[(0, 1)].re - 2f64.sqrt()).abs() < 1e-15);
        assert!((one.jplus[(1, 2)].re - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(one.jplus[(1, 0)].re, 0.0);
    }

    #[test]
    fn su2_commutators() {
        for two_j in 0..=40 {
            let ops = irrep_operators(two_j);
            let comm = &ops.jx * &ops.jy - &ops.jy * &ops.jx;
            let target = ops.jz.map(|z| z * C64::i());
            assert!(max_abs(&(comm - target)) < 1e-12, "2J={two_j}");
            // Casimir
            let j = two_j as f64 / 2.0;
            let casimir = &ops.jx * &ops.jx + &ops.jy * &ops.jy + &ops.jz * &ops.jz;
            let id = DMatrix::<C64>::identity(two_j as usize + 1, two_j as usize + 1)
                .map(|z| z * j * (j + 1.0));
            assert!(max_abs(&(casimir - id)) < 1e-10);
        }
    }
}
