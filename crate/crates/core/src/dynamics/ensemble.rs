//! Monte Carlo ensembles of independent trajectories.
//!
//! Trajectory `i` draws its noise from stream `i` of the configured seed (see
//! [`noise_rng`](super::noise_rng)). Trajectories run in parallel with no
//! shared mutable state; statistics are formed after all of them finish, in
//! trajectory order, so results do not depend on scheduling.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::lindblad::SymmetricCoefficients;
use super::trajectory::{build_engine, drive, Trajectory, TrajectoryConfig};
use super::ModelKind;
use crate::error::{Error, Result};
use crate::gcs::ObservableRecord;
use crate::spinrep::BlockLayout;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SeriesStat {
    pub mean: f64,
    /// Standard error of the mean (sample standard deviation / sqrt(count)).
    pub stderr: f64,
    /// Trajectories contributing (undefined values are skipped).
    pub count: usize,
}

impl SeriesStat {
    fn from_values(values: impl Iterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.collect();
        let count = v.len();
        if count == 0 {
            return Self::default();
        }
        let mean = v.iter().sum::<f64>() / count as f64;
        let stderr = if count > 1 {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, count }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TerminalOutcome {
    pub trajectory: usize,
    /// `2M` of the terminal state if it collapsed.
    pub two_m: Option<i32>,
    pub t: f64,
    pub purity: f64,
    pub var_jz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Pooled bins as `(lowest 2M, highest 2M, observed, expected)`.
    pub bins: Vec<(i32, i32, f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSummary {
    pub n_traj: usize,
    pub t: Vec<f64>,
    pub kappa_t: Vec<f64>,
    /// Per column name (same names as the trajectory CSV), one stat per time.
    pub series: Vec<(String, Vec<SeriesStat>)>,
    pub terminal: Vec<TerminalOutcome>,
    /// Count of trajectories per terminal `2M`; unresolved ones are left out.
    pub final_m_histogram: BTreeMap<i32, usize>,
    /// `max_t |mean(π_t[J_z]) - mean(π_0[J_z])| / stderr_t`.
    pub martingale_max_z: f64,
}

impl EnsembleSummary {
    pub fn column(&self, name: &str) -> Option<&[SeriesStat]> {
        self.series
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn unresolved(&self) -> usize {
        self.terminal.iter().filter(|o| o.two_m.is_none()).count()
    }
}

/// Steps at which a full-length run writes records, starting with 0.
fn record_steps(config: &TrajectoryConfig) -> Vec<usize> {
    let n_steps = config.n_steps();
    let mut grid: Vec<usize> = (0..=n_steps).step_by(config.record_every).collect();
    if grid.last() != Some(&n_steps) {
        grid.push(n_steps);
    }
    grid
}

/// Pads a trajectory that stopped early with copies of its final record, so
/// every trajectory covers the same time grid. A collapsed state is a fixed
/// point of both filters, so the padding is the trajectory's own future.
fn pad_records(traj: &Trajectory, config: &TrajectoryConfig) -> Vec<ObservableRecord> {
    let grid = record_steps(config);
    let mut records = traj.records.clone();
    if records.len() >= grid.len() {
        return records;
    }
    let last = records.pop().expect("initial record");
    let last_step = (last.t / config.dt).round() as usize;
    if records.is_empty() || grid[records.len()] == last_step {
        records.push(last.clone());
    }
    while records.len() < grid.len() {
        let mut r = last.clone();
        r.t = grid[records.len()] as f64 * config.dt;
        r.kappa_t = config.kappa * r.t;
        r.dy = 0.0;
        records.push(r);
    }
    records
}

const SCALAR_COLUMNS: [&str; 8] = [
    "mean_jx", "mean_jy", "mean_jz", "var_jz", "var_jy", "xi2", "purity", "dY",
];

fn scalar(record: &ObservableRecord, name: &str) -> Option<f64> {
    Some(match name {
        "mean_jx" => record.mean_jx,
        "mean_jy" => record.mean_jy,
        "mean_jz" => record.mean_jz,
        "var_jz" => record.var_jz,
        "var_jy" => record.var_jy,
        "xi2" => return record.xi2,
        "purity" => record.purity,
        "dY" => record.dy,
        _ => unreachable!("unknown column {name}"),
    })
}

/// Runs `n_traj` trajectories of `config` in parallel and aggregates them.
pub fn ensemble_run(config: &TrajectoryConfig, n_traj: usize) -> Result<EnsembleSummary> {
    if n_traj == 0 {
        return Err(Error::Config("n_traj must be at least 1".into()));
    }
    config.validate()?;
    let layout = BlockLayout::new(config.n_spins)?;
    let coeffs = (config.model == ModelKind::Symmetric).then(|| Arc::new(SymmetricCoefficients::build(&layout)));

    let trajectories: Vec<Trajectory> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let engine = build_engine(config, coeffs.clone())?;
            drive(engine, config, i as u64)
        })
        .collect::<Result<_>>()?;

    let terminal: Vec<TerminalOutcome> = trajectories
        .iter()
        .enumerate()
        .map(|(i, traj)| {
            let last = traj.records.last().expect("initial record");
            TerminalOutcome {
                trajectory: i,
                two_m: traj.final_two_m(),
                t: last.t,
                purity: last.purity,
                var_jz: last.var_jz,
            }
        })
        .collect();
    let mut final_m_histogram = BTreeMap::new();
    for o in &terminal {
        if let Some(m) = o.two_m {
            *final_m_histogram.entry(m).or_insert(0) += 1;
        }
    }

    let padded: Vec<Vec<ObservableRecord>> = trajectories.iter().map(|t| pad_records(t, config)).collect();
    let n_times = padded.iter().map(Vec::len).min().unwrap_or(0);
    let t: Vec<f64> = padded[0][..n_times].iter().map(|r| r.t).collect();
    let kappa_t = t.iter().map(|t| t * config.kappa).collect();

    let mut series = Vec::new();
    for name in SCALAR_COLUMNS {
        let stats: Vec<SeriesStat> = (0..n_times)
            .map(|i| SeriesStat::from_values(padded.iter().filter_map(|rs| scalar(&rs[i], name))))
            .collect();
        series.push((name.to_string(), stats));
    }
    for (k, irrep) in layout.irreps().iter().enumerate() {
        let stats: Vec<SeriesStat> = (0..n_times)
            .map(|i| SeriesStat::from_values(padded.iter().map(|rs| rs[i].block_traces[k])))
            .collect();
        series.push((crate::report::trace_column_name(irrep.two_j), stats));
    }

    let jz = &series[2].1;
    let start = jz[0].mean;
    let martingale_max_z = jz
        .iter()
        .skip(1)
        .map(|s| {
            let dev = (s.mean - start).abs();
            if s.stderr > 0.0 {
                dev / s.stderr
            } else if dev < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);

    Ok(EnsembleSummary {
        n_traj,
        t,
        kappa_t,
        series,
        terminal,
        final_m_histogram,
        martingale_max_z,
    })
}

/// Pearson chi-square of a terminal-`M` histogram against the binomial
/// `C(N, N/2 + M) / 2^N`. Adjacent bins are pooled from the tails inward
/// until each expected count is at least `min_expected`.
pub fn binomial_chi_square(histogram: &BTreeMap<i32, usize>, n_spins: u32, min_expected: f64) -> ChiSquare {
    let total: usize = histogram.values().sum();
    let n = n_spins as i32;
    let norm = 2f64.powi(n_spins as i32);
    let raw: Vec<(i32, f64, f64)> = (0..=n)
        .map(|k| {
            let two_m = 2 * k - n;
            let p = binomial(n_spins, k as u32) / norm;
            (two_m, *histogram.get(&two_m).unwrap_or(&0) as f64, p * total as f64)
        })
        .collect();

    // Pool symmetric tails toward the center.
    let mut bins: Vec<(i32, i32, f64, f64)> = raw.iter().map(|&(m, o, e)| (m, m, o, e)).collect();
    while let Some(i) = bins.iter().position(|b| b.3 < min_expected) {
        if bins.len() <= 2 {
            break;
        }
        let j = if i + 1 < bins.len() && (i == 0 || bins[i + 1].3 <= bins[i - 1].3) { i + 1 } else { i - 1 };
        let (lo, hi) = (i.min(j), i.max(j));
        let merged = (bins[lo].0, bins[hi].1, bins[lo].2 + bins[hi].2, bins[lo].3 + bins[hi].3);
        bins[lo] = merged;
        bins.remove(hi);
    }
    let statistic: f64 = bins.iter().map(|b| (b.2 - b.3).powi(2) / b.3).sum();
    let dof = bins.len().saturating_sub(1).max(1);
    let p_value = 1.0 - ChiSquared::new(dof as f64).expect("dof > 0").cdf(statistic);
    ChiSquare {
        statistic,
        dof,
        p_value,
        bins,
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::InitialState;

    #[test]
    fn chi_square_of_exact_counts_is_zero() {
        // 256 trajectories distributed exactly as C(8, k).
        let mut h = BTreeMap::new();
        for k in 0..=8u32 {
            h.insert(2 * k as i32 - 8, binomial(8, k) as usize);
        }
        let chi = binomial_chi_square(&h, 8, 5.0);
        assert!(chi.statistic < 1e-12);
        assert!(chi.p_value > 0.999);
        // Tails pooled: C(8,0) = 1 and C(8,1) = 8 both sit below 5 alone... only the first.
        assert!(chi.bins.iter().all(|b| b.3 >= 5.0));
        assert_eq!(chi.bins.iter().map(|b| b.2).sum::<f64>(), 256.0);
    }

    #[test]
    fn chi_square_flags_a_wrong_distribution() {
        let mut h = BTreeMap::new();
        h.insert(8, 200usize);
        h.insert(-8, 200usize);
        let chi = binomial_chi_square(&h, 8, 5.0);
        assert!(chi.p_value < 1e-6);
    }

    #[test]
    fn small_ensemble_is_deterministic_and_padded() {
        let config = TrajectoryConfig {
            n_spins: 3,
            kappa: 1.0,
            dt: 1e-3,
            t_final: 0.3,
            seed: 99,
            model: ModelKind::Symmetric,
            initial: InitialState::SteadyState { two_m: 1 },
            record_every: 50,
            stop_at_steady_state: true,
            ..Default::default()
        };
        let a = ensemble_run(&config, 4).unwrap();
        let b = ensemble_run(&config, 4).unwrap();
        assert_eq!(a.t.len(), 1 + 300 / 50);
        assert_eq!(a.t, b.t);
        assert_eq!(a.final_m_histogram.get(&1), Some(&4));
        assert_eq!(a.martingale_max_z, 0.0);
        let purity = a.column("purity").unwrap();
        assert!(purity.iter().all(|s| (s.mean - 1.0 / 3.0).abs() < 1e-12));
    }
}
