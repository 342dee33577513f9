//! Degeneracy-resolved coupled basis from a sequential Clebsch-Gordan chain.
//!
//! Product basis index `p` has bit `n` set when spin `n` points down. Spins
//! are coupled in order `0, 1, ..., N-1`; each step maps a multiplet `K` of
//! the first `n` spins onto `J = K ± 1/2` (Condon-Shortley phases):
//!
//! ```text
//! |K+½, M⟩ =  sqrt((K+M+½)/(2K+1)) |K, M-½⟩|↑⟩ + sqrt((K-M+½)/(2K+1)) |K, M+½⟩|↓⟩
//! |K-½, M⟩ = -sqrt((K-M+½)/(2K+1)) |K, M-½⟩|↑⟩ + sqrt((K+M+½)/(2K+1)) |K, M+½⟩|↓⟩
//! ```
//!
//! Copies of `J` are numbered with the `K = J - ½` parents first, then the
//! `K = J + ½` parents, each in their own copy order.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spinrep::BlockLayout;

pub const COUPLED_BASIS_MAX_SPINS: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisLabel {
    pub two_j: u32,
    pub two_m: i32,
    /// Degeneracy index `i` in `0..d_N^J`.
    pub copy: usize,
}

#[derive(Debug, Clone)]
pub struct CoupledBasis {
    layout: Arc<BlockLayout>,
    /// Real orthogonal; column `c` is `|J, M, i⟩` for `labels[c]` in the product basis.
    transform: DMatrix<f64>,
    labels: Vec<BasisLabel>,
}

/// One multiplet copy: `2J` and its `2J+1` vectors, `M` descending.
struct Multiplet {
    two_j: u32,
    vectors: Vec<Vec<f64>>,
}

fn couple(parent: &Multiplet, n_parent: u32, up: bool) -> Multiplet {
    let two_k = parent.two_j as i32;
    let two_j = if up { two_k + 1 } else { two_k - 1 };
    let len = 1usize << (n_parent + 1);
    let down_bit = 1usize << n_parent;
    let k = two_k as f64 / 2.0;
    let denom = 2.0 * k + 1.0;
    let parent_vec = |two_mk: i32| -> Option<&Vec<f64>> {
        if two_mk.abs() > two_k {
            return None;
        }
        Some(&parent.vectors[((two_k - two_mk) / 2) as usize])
    };

    let vectors = (0..=two_j)
        .map(|row| {
            let two_m = two_j - 2 * row;
            let m = two_m as f64 / 2.0;
            let (c_up, c_down) = if up {
                (((k + m + 0.5) / denom).sqrt(), ((k - m + 0.5) / denom).sqrt())
            } else {
                (-((k - m + 0.5) / denom).sqrt(), ((k + m + 0.5) / denom).sqrt())
            };
            let mut v = vec![0.0; len];
            // New spin up: parent carries M - 1/2.
            if let Some(p) = parent_vec(two_m - 1) {
                for (i, &x) in p.iter().enumerate() {
                    v[i] += c_up * x;
                }
            }
            if let Some(p) = parent_vec(two_m + 1) {
                for (i, &x) in p.iter().enumerate() {
                    v[i | down_bit] += c_down * x;
                }
            }
            v
        })
        .collect();
    Multiplet {
        two_j: two_j as u32,
        vectors,
    }
}

/// Multiplets of `n` spins grouped by `2J` (index `2J`), copies in order.
fn multiplets(n_spins: u32) -> Vec<Vec<Multiplet>> {
    let mut current: Vec<Vec<Multiplet>> = vec![
        Vec::new(),
        vec![Multiplet {
            two_j: 1,
            vectors: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        }],
    ];
    for n in 1..n_spins {
        let mut next: Vec<Vec<Multiplet>> = (0..=n + 1).map(|_| Vec::new()).collect();
        for two_j in 0..=(n + 1) {
            // K = J - 1/2 parents, then K = J + 1/2 parents.
            if two_j >= 1 {
                if let Some(group) = current.get(two_j as usize - 1) {
                    for parent in group {
                        next[two_j as usize].push(couple(parent, n, true));
                    }
                }
            }
            if let Some(group) = current.get(two_j as usize + 1) {
                for parent in group {
                    next[two_j as usize].push(couple(parent, n, false));
                }
            }
        }
        current = next;
    }
    current
}

impl CoupledBasis {
    pub fn new(n_spins: u32) -> Result<Self> {
        if n_spins > COUPLED_BASIS_MAX_SPINS {
            return Err(Error::Capacity {
                what: "n_spins (coupled basis)",
                requested: n_spins as usize,
                max: COUPLED_BASIS_MAX_SPINS as usize,
            });
        }
        let layout = Arc::new(BlockLayout::new(n_spins)?);
        let dim = 1usize << n_spins;
        let mut groups = multiplets(n_spins);
        let mut transform = DMatrix::<f64>::zeros(dim, dim);
        let mut labels = Vec::with_capacity(dim);
        for irrep in layout.irreps() {
            let group = std::mem::take(&mut groups[irrep.two_j as usize]);
            debug_assert_eq!(group.len() as u128, irrep.degeneracy);
            for (copy, mult) in group.into_iter().enumerate() {
                debug_assert_eq!(mult.two_j, irrep.two_j);
                for (row, v) in mult.vectors.into_iter().enumerate() {
                    let c = labels.len();
                    transform.set_column(c, &nalgebra::DVector::from_vec(v));
                    labels.push(BasisLabel {
                        two_j: irrep.two_j,
                        two_m: irrep.two_m(row),
                        copy,
                    });
                }
            }
        }
        Ok(Self {
            layout,
            transform,
            labels,
        })
    }

    pub fn n_spins(&self) -> u32 {
        self.layout.n_spins()
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn transform(&self) -> &DMatrix<f64> {
        &self.transform
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    /// Column of `|J, M, i⟩` for irrep index `k`, copy `i`, row `a` (M descending).
    pub fn column(&self, k: usize, copy: usize, a: usize) -> usize {
        let irrep = self.layout.irreps()[k];
        let start: usize = self.layout.irreps()[..k]
            .iter()
            .map(|ir| ir.degeneracy as usize * ir.dim())
            .sum();
        start + copy * irrep.dim() + a
    }
}

pub fn coupled_basis(n_spins: u32) -> Result<CoupledBasis> {
    CoupledBasis::new(n_spins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::full::{collective_ops, FullOps};

    #[test]
    fn two_spin_singlet() {
        let b = coupled_basis(2).unwrap();
        let c = b.column(1, 0, 0);
        assert_eq!(b.labels()[c], BasisLabel { two_j: 0, two_m: 0, copy: 0 });
        let v = b.transform().column(c);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // |↑↓⟩ is index 2 (spin 1 down), |↓↑⟩ index 1.
        assert!((v[2].abs() - s).abs() < 1e-15 && (v[1].abs() - s).abs() < 1e-15);
        assert!((v[1] + v[2]).abs() < 1e-15);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[3], 0.0);
    }

    #[test]
    fn label_counts() {
        let count = |n: u32| {
            let b = coupled_basis(n).unwrap();
            let mut per_j = std::collections::BTreeMap::new();
            for l in b.labels() {
                if l.two_m == l.two_j as i32 {
                    *per_j.entry(l.two_j).or_insert(0u128) += 1;
                }
            }
            per_j
        };
        assert_eq!(count(3).into_iter().collect::<Vec<_>>(), vec![(1, 2), (3, 1)]);
        assert_eq!(count(4).into_iter().collect::<Vec<_>>(), vec![(0, 2), (2, 3), (4, 1)]);
        for n in 1..=10 {
            let layout = BlockLayout::new(n).unwrap();
            let counts = count(n);
            for ir in layout.irreps() {
                assert_eq!(counts[&ir.two_j], ir.degeneracy, "N={n}");
            }
        }
    }

    #[test]
    fn orthogonal_and_eigenvectors() {
        for n in 1..=8 {
            let b = coupled_basis(n).unwrap();
            let u = b.transform();
            let dev = (u.transpose() * u - DMatrix::<f64>::identity(b.dim(), b.dim())).abs().max();
            assert!(dev < 1e-12, "N={n} orthogonality {dev}");
            let ops: FullOps = collective_ops(n);
            let uc = u.map(|x| num_complex::Complex64::new(x, 0.0));
            let jz = uc.adjoint() * &ops.jz * &uc;
            let casimir = uc.adjoint() * ops.casimir() * &uc;
            for (c, l) in b.labels().iter().enumerate() {
                let j = l.two_j as f64 / 2.0;
                for r in 0..b.dim() {
                    let want_z = if r == c { l.two_m as f64 / 2.0 } else { 0.0 };
                    let want_c = if r == c { j * (j + 1.0) } else { 0.0 };
                    assert!((jz[(r, c)].re - want_z).abs() < 1e-10);
                    assert!((casimir[(r, c)] - num_complex::Complex64::new(want_c, 0.0)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn raising_operator_follows_condon_shortley() {
        // J_+ |J, M, i⟩ = sqrt(J(J+1) - M(M+1)) |J, M+1, i⟩ with a positive coefficient.
        let n = 5;
        let b = coupled_basis(n).unwrap();
        let ops = collective_ops(n);
        let uc = b.transform().map(|x| num_complex::Complex64::new(x, 0.0));
        let jp = uc.adjoint() * &ops.jplus * &uc;
        for (k, ir) in b.layout().irreps().iter().enumerate() {
            for copy in 0..ir.degeneracy as usize {
                for a in 1..ir.dim() {
                    let want = crate::spinrep::raising_element(ir.two_j, ir.two_m(a));
                    let got = jp[(b.column(k, copy, a - 1), b.column(k, copy, a))];
                    assert!((got.re - want).abs() < 1e-12 && got.im.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cap() {
        assert!(matches!(coupled_basis(13), Err(Error::Capacity { .. })));
    }
}
