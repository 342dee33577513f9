use std::io::Write;
use std::path::Path;

use spinfilter::dynamics::binomial_chi_square;
use spinfilter::oracle::run_gate;
use spinfilter::report;
use spinfilter::{ensemble_run, run_trajectory, Trajectory};

use crate::config::ConfigArgs;
use crate::error::CliError;
use crate::output::{quick_gate, Format, Manifest, OutDir};

/// Minimum expected count per chi-square bin.
const CHI_SQUARE_MIN_EXPECTED: f64 = 5.0;

pub fn run(args: &ConfigArgs, out: &Path, format: Format) -> Result<(), CliError> {
    let resolved = args.resolve(false)?;
    let config = &resolved.config;
    let gate = quick_gate(config.seed)?;
    let traj = run_trajectory(config)?;
    let out = OutDir::create(out, format)?;
    out.write_trajectory("", &traj)?;
    let snapshot = traj.final_state.to_snapshot();
    out.write("final_state.gcs", |w| w.write_all(snapshot.as_bytes()))?;
    Manifest {
        command: "run",
        config,
        seed_from_entropy: resolved.seed_from_entropy,
        gate,
        n_traj: None,
        notes: vec![],
    }
    .write(&out, "manifest.toml")?;
    print_summary(&traj);
    Ok(())
}

pub fn print_summary(traj: &Trajectory) {
    let Some(last) = traj.records.last() else { return };
    let min_xi2 = traj.records.iter().filter_map(|r| r.xi2).fold(f64::INFINITY, f64::min);
    println!(
        "records {}  final kappa_t {}  <Jz> {:.6}  var_jz {:.3e}  purity {:.6}  min xi2 {}",
        traj.records.len(),
        report::format_number(last.kappa_t),
        last.mean_jz,
        last.var_jz,
        last.purity,
        if min_xi2.is_finite() { format!("{min_xi2:.6}") } else { report::UNDEFINED.into() }
    );
    if let Some(c) = traj.collapse {
        println!("collapsed onto 2M = {} at step {}", c.two_m, c.step);
    }
}

pub fn ensemble(args: &ConfigArgs, n_traj: Option<usize>, out: &Path, format: Format) -> Result<(), CliError> {
    let resolved = args.resolve(true)?;
    let config = &resolved.config;
    let n_traj = n_traj
        .or(resolved.n_traj)
        .ok_or_else(|| CliError::Usage("ensemble needs --n_traj or an `n_traj` key".into()))?;
    if n_traj == 0 {
        return Err(CliError::Usage("n_traj must be at least 1".into()));
    }
    let gate = quick_gate(config.seed)?;
    let summary = ensemble_run(config, n_traj)?;
    let out = OutDir::create(out, format)?;

    match format {
        Format::Csv => {
            out.write("ensemble.csv", |w| report::write_ensemble_csv(w, &summary))?;
        }
        Format::JsonLines => {
            let rows: Vec<serde_json::Value> = (0..summary.t.len())
                .map(|i| {
                    let mut row = serde_json::Map::new();
                    row.insert("t".into(), summary.t[i].into());
                    row.insert("kappa_t".into(), summary.kappa_t[i].into());
                    row.insert("n_traj".into(), summary.n_traj.into());
                    for (name, stats) in &summary.series {
                        row.insert(name.clone(), serde_json::to_value(stats[i]).expect("stat serializes"));
                    }
                    serde_json::Value::Object(row)
                })
                .collect();
            out.write("ensemble.jsonl", |w| report::write_jsonl(w, &rows))?;
        }
    }
    let resolved_total: usize = summary.final_m_histogram.values().sum();
    let chi = (resolved_total > 0)
        .then(|| binomial_chi_square(&summary.final_m_histogram, config.n_spins, CHI_SQUARE_MIN_EXPECTED));
    out.write("histogram.csv", |w| {
        report::write_histogram_csv(w, &summary, config.n_spins, chi.as_ref())
    })?;
    out.write("terminal.jsonl", |w| report::write_jsonl(w, &summary.terminal))?;
    Manifest {
        command: "ensemble",
        config,
        seed_from_entropy: resolved.seed_from_entropy,
        gate,
        n_traj: Some(n_traj),
        notes: vec![],
    }
    .write(&out, "manifest.toml")?;

    println!(
        "trajectories {n_traj}  unresolved {}  max |mean Jz drift|/stderr {:.3}",
        summary.unresolved(),
        summary.martingale_max_z
    );
    if let Some(c) = &chi {
        println!(
            "final-M chi-square vs binomial: {:.4} on {} dof, p = {:.4}",
            c.statistic, c.dof, c.p_value
        );
    }
    Ok(())
}

pub fn validate(seed: Option<u64>) -> Result<(), CliError> {
    let seed = seed.unwrap_or_else(rand::random);
    println!("seed {seed}");
    let report = run_gate(seed)?;
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "gate failure: max generator deviation {:.3e}, max lockstep deviation {:.3e}",
            report.max_generator_deviation(),
            report.max_lockstep_deviation()
        )))
    }
}
