//! Output directory handling and the manifest file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use spinfilter::oracle::{generator_check, GENERATOR_TOLERANCE};
use spinfilter::report;
use spinfilter::{ModelKind, Trajectory, TrajectoryConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    #[value(name = "json-lines", alias = "jsonl")]
    JsonLines,
}

pub struct OutDir {
    root: PathBuf,
    pub format: Format,
}

impl OutDir {
    pub fn create(root: &Path, format: Format) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            format,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Write `name` through a buffered writer, attaching the path to errors.
    pub fn write(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    /// `<prefix>trajectory.{csv,jsonl}`, `<prefix>block_variance.csv` (CSV
    /// only; JSON lines carry the per-block variances inline) and
    /// `<prefix>diagnostics.jsonl`.
    pub fn write_trajectory(&self, prefix: &str, traj: &Trajectory) -> Result<(), CliError> {
        let layout = traj.final_state.layout();
        match self.format {
            Format::Csv => {
                self.write(&format!("{prefix}trajectory.csv"), |w| {
                    report::write_csv(w, layout, &traj.records)
                })?;
                self.write(&format!("{prefix}block_variance.csv"), |w| {
                    report::write_block_variance_csv(w, layout, &traj.records)
                })?;
            }
            Format::JsonLines => {
                self.write(&format!("{prefix}trajectory.jsonl"), |w| {
                    report::write_jsonl(w, &traj.records)
                })?;
            }
        }
        self.write(&format!("{prefix}diagnostics.jsonl"), |w| {
            report::write_jsonl(w, &traj.diagnostics)
        })?;
        Ok(())
    }
}

/// Quick generator-level check of the block dissipators against the dense
/// per-site oracle, run before producing any output.
#[derive(Debug, Clone, Copy)]
pub struct GateStatus {
    pub passed: bool,
    pub max_deviation: f64,
}

impl std::fmt::Display for GateStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "generator check N=2..6 {} (max deviation {:.3e}, tolerance {:e})",
            if self.passed { "pass" } else { "FAIL" },
            self.max_deviation,
            GENERATOR_TOLERANCE
        )
    }
}

pub fn quick_gate(seed: u64) -> Result<GateStatus, CliError> {
    let mut passed = true;
    let mut max_deviation = 0.0f64;
    for n in 2..=6 {
        for model in [ModelKind::Collective, ModelKind::Symmetric] {
            let r = generator_check(n, model, 5, seed)?;
            passed &= r.passed();
            max_deviation = max_deviation.max(r.max_deviation);
        }
    }
    if !passed {
        return Err(CliError::Numerical(format!(
            "gate failure: generator deviation {max_deviation:.3e} exceeds {GENERATOR_TOLERANCE:e}"
        )));
    }
    Ok(GateStatus {
        passed,
        max_deviation,
    })
}

pub struct Manifest<'a> {
    pub command: &'a str,
    pub config: &'a TrajectoryConfig,
    pub seed_from_entropy: bool,
    pub gate: GateStatus,
    pub n_traj: Option<usize>,
    pub notes: Vec<String>,
}

impl Manifest<'_> {
    /// A flat TOML file that `--config` accepts back unchanged.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# spinfilter {}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!("# command: {}\n", self.command));
        out.push_str(&format!(
            "# seed: {}{}\n",
            self.config.seed,
            if self.seed_from_entropy { " (drawn from OS entropy)" } else { "" }
        ));
        out.push_str(&format!("# gate: {}\n", self.gate));
        for note in &self.notes {
            out.push_str(&format!("# {note}\n"));
        }
        out.push_str(&toml::to_string(self.config).expect("configuration serializes"));
        if let Some(n) = self.n_traj {
            out.push_str(&format!("n_traj = {n}\n"));
        }
        out
    }

    pub fn write(&self, out: &OutDir, name: &str) -> Result<(), CliError> {
        let text = self.render();
        out.write(name, |w| w.write_all(text.as_bytes()))?;
        Ok(())
    }
}
