//! Preset experiments.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use rayon::prelude::*;
use serde::Serialize;
use spinfilter::dynamics::run_trajectory_stream;
use spinfilter::report::format_number;
use spinfilter::spinrep::alpha;
use spinfilter::{run_trajectory, InitialState, ModelKind, Trajectory, TrajectoryConfig};

use crate::commands::print_summary;
use crate::error::CliError;
use crate::output::{quick_gate, Format, GateStatus, Manifest, OutDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// N=60, κ=6: one collective and one symmetric trajectory from the x-polarized state.
    Fig2,
    /// N=10, κ=10, symmetric: block populations and per-block J_y variances.
    Fig3,
    /// N=4, κ=25, symmetric: 50 trajectories to collapse, purity grouped by final M.
    Fig4,
}

const FIG4_TRAJECTORIES: u64 = 50;

pub fn fig2_config(model: ModelKind, seed: u64) -> TrajectoryConfig {
    let kappa = 6.0;
    // Euler-Maruyama needs κdt ≲ 2e-4 to stay stable for the collective model at N=60.
    TrajectoryConfig {
        n_spins: 60,
        kappa,
        dt: 2e-4 / kappa,
        t_final: 30.0 / kappa,
        seed,
        model,
        initial: InitialState::CoherentX,
        record_every: 50,
        ..Default::default()
    }
}

pub fn fig3_config(seed: u64) -> TrajectoryConfig {
    let kappa = 10.0;
    TrajectoryConfig {
        n_spins: 10,
        kappa,
        dt: 1e-3 / kappa,
        t_final: 20.0 / kappa,
        seed,
        model: ModelKind::Symmetric,
        initial: InitialState::CoherentX,
        record_every: 10,
        ..Default::default()
    }
}

pub fn fig4_config(seed: u64) -> TrajectoryConfig {
    let kappa = 25.0;
    TrajectoryConfig {
        n_spins: 4,
        kappa,
        dt: 1e-3 / kappa,
        t_final: 2000.0 / kappa,
        seed,
        model: ModelKind::Symmetric,
        initial: InitialState::CoherentX,
        record_every: 25,
        stop_at_steady_state: true,
        ..Default::default()
    }
}

pub fn run(preset: Preset, seed: Option<u64>, out: &Path, format: Format) -> Result<(), CliError> {
    let seed_from_entropy = seed.is_none();
    let seed = seed.unwrap_or_else(rand::random);
    let gate = quick_gate(seed)?;
    let manifest = |command, config| Manifest {
        command,
        config,
        seed_from_entropy,
        gate,
        n_traj: None,
        notes: vec![],
    };
    match preset {
        Preset::Fig2 => {
            let out = OutDir::create(&out.join("fig2"), format)?;
            let configs = [fig2_config(ModelKind::Collective, seed), fig2_config(ModelKind::Symmetric, seed)];
            let runs: Vec<_> = configs.par_iter().map(run_trajectory).collect();
            for (config, traj) in configs.iter().zip(runs) {
                let traj = traj?;
                let name = config.model.as_str();
                out.write_trajectory(&format!("{name}_"), &traj)?;
                manifest("figure fig2", config).write(&out, &format!("{name}_manifest.toml"))?;
                print!("{name}: ");
                print_summary(&traj);
            }
        }
        Preset::Fig3 => {
            let out = OutDir::create(&out.join("fig3"), format)?;
            let config = fig3_config(seed);
            let traj = run_trajectory(&config)?;
            out.write_trajectory("", &traj)?;
            manifest("figure fig3", &config).write(&out, "manifest.toml")?;
            print_summary(&traj);
            let last = traj.records.last().expect("at least one record");
            println!(
                "final block traces (J descending): {}",
                last.block_traces.iter().map(|&x| format_number(x)).collect::<Vec<_>>().join(" ")
            );
        }
        Preset::Fig4 => fig4(&OutDir::create(&out.join("fig4"), format)?, seed, gate, seed_from_entropy)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct PurityRow {
    trajectory: u64,
    final_m: Option<f64>,
    t: f64,
    kappa_t: f64,
    purity: f64,
}

#[derive(Serialize)]
struct TerminalRow {
    trajectory: u64,
    final_m: Option<f64>,
    kappa_t: f64,
    purity: f64,
    expected_purity: Option<f64>,
}

fn fig4(out: &OutDir, seed: u64, gate: GateStatus, seed_from_entropy: bool) -> Result<(), CliError> {
    let config = fig4_config(seed);
    let n = config.n_spins;
    let runs: Vec<Trajectory> = (0..FIG4_TRAJECTORIES)
        .into_par_iter()
        .map(|s| run_trajectory_stream(&config, s))
        .collect::<Result<_, _>>()?;

    let expected = |two_m: i32| alpha(n, two_m).ok().map(|a| 1.0 / a as f64);
    let mut series = Vec::new();
    let mut terminal = Vec::new();
    let mut groups: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    let mut unresolved = 0;
    for (i, traj) in runs.iter().enumerate() {
        let two_m = traj.final_two_m();
        let final_m = two_m.map(|m| m as f64 / 2.0);
        for r in &traj.records {
            series.push(PurityRow {
                trajectory: i as u64,
                final_m,
                t: r.t,
                kappa_t: r.kappa_t,
                purity: r.purity,
            });
        }
        let last = traj.records.last().expect("at least one record");
        terminal.push(TerminalRow {
            trajectory: i as u64,
            final_m,
            kappa_t: last.kappa_t,
            purity: last.purity,
            expected_purity: two_m.and_then(expected),
        });
        match two_m {
            Some(m) => groups.entry(m.abs()).or_default().push(last.purity),
            None => unresolved += 1,
        }
    }
    series.sort_by(|a, b| {
        let key = |r: &PurityRow| r.final_m.map(f64::abs).unwrap_or(f64::INFINITY);
        key(a).total_cmp(&key(b)).then(a.trajectory.cmp(&b.trajectory))
    });

    let opt = |x: Option<f64>| x.map(format_number).unwrap_or_else(|| spinfilter::report::UNDEFINED.into());
    match out.format {
        Format::Csv => {
            out.write("purity.csv", |w| {
                writeln!(w, "trajectory,final_M,t,kappa_t,purity")?;
                for r in &series {
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        r.trajectory,
                        opt(r.final_m),
                        format_number(r.t),
                        format_number(r.kappa_t),
                        format_number(r.purity)
                    )?;
                }
                Ok(())
            })?;
            out.write("terminal.csv", |w| {
                writeln!(w, "trajectory,final_M,kappa_t,purity,expected_purity")?;
                for r in &terminal {
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        r.trajectory,
                        opt(r.final_m),
                        format_number(r.kappa_t),
                        format_number(r.purity),
                        opt(r.expected_purity)
                    )?;
                }
                Ok(())
            })?;
        }
        Format::JsonLines => {
            out.write("purity.jsonl", |w| spinfilter::report::write_jsonl(w, &series))?;
            out.write("terminal.jsonl", |w| spinfilter::report::write_jsonl(w, &terminal))?;
        }
    }
    Manifest {
        command: "figure fig4",
        config: &config,
        seed_from_entropy,
        gate,
        n_traj: None,
        notes: vec![format!("trajectories: noise streams 0..{FIG4_TRAJECTORIES}")],
    }
    .write(out, "manifest.toml")?;

    for (two_m_abs, purities) in &groups {
        let mean = purities.iter().sum::<f64>() / purities.len() as f64;
        println!(
            "|M| = {}: {} trajectories, mean terminal purity {:.6} (expected {:.6})",
            format_number(*two_m_abs as f64 / 2.0),
            purities.len(),
            mean,
            expected(*two_m_abs).unwrap_or(f64::NAN)
        );
    }
    if unresolved > 0 {
        println!("{unresolved} trajectories did not collapse by kappa_t = {}", config.kappa * config.t_final);
    }
    Ok(())
}
