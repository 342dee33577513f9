//! Layered configuration: built-in defaults, then a flat TOML file, then
//! command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use spinfilter::dynamics::Integrator;
use spinfilter::{EngineKind, InitialState, ModelKind, TrajectoryConfig};

use crate::error::CliError;

/// Flags named after the configuration keys. Each one overrides the file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat TOML file with configuration keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "n_spins", visible_alias = "n-spins", value_name = "N")]
    pub n_spins: Option<u32>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "t_final", visible_alias = "t-final")]
    pub t_final: Option<f64>,
    /// Noise seed; drawn from OS entropy when absent everywhere.
    #[arg(long)]
    pub seed: Option<u64>,
    /// collective | symmetric
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// block | full_oracle
    #[arg(long)]
    pub engine: Option<EngineKind>,
    /// euler_maruyama | exponential
    #[arg(long)]
    pub integrator: Option<Integrator>,
    /// coherent_x | steady_state:<M> | snapshot:<path>
    #[arg(long)]
    pub initial: Option<InitialState>,
    #[arg(long = "record_every", visible_alias = "record-every")]
    pub record_every: Option<usize>,
    #[arg(long = "stop_at_steady_state", visible_alias = "stop-at-steady-state")]
    pub stop_at_steady_state: Option<bool>,
    #[arg(long = "diagnostics_every", visible_alias = "diagnostics-every")]
    pub diagnostics_every: Option<usize>,
}

/// A resolved configuration and where its seed came from.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: TrajectoryConfig,
    pub seed_from_entropy: bool,
    /// `n_traj` read from the file, for ensembles.
    pub n_traj: Option<usize>,
}

/// Keys accepted in a file besides the trajectory configuration.
const EXTRA_KEYS: [&str; 1] = ["n_traj"];

pub fn read_table(path: &Path) -> Result<toml::Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.parse::<toml::Table>()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

impl ConfigArgs {
    /// Merge defaults, the file and flags. `allow_n_traj` admits the
    /// ensemble-only `n_traj` key in the file.
    pub fn resolve(&self, allow_n_traj: bool) -> Result<Resolved, CliError> {
        let mut table = match &self.config {
            Some(path) => read_table(path)?,
            None => toml::Table::new(),
        };
        let mut n_traj = None;
        for key in EXTRA_KEYS {
            if let Some(v) = table.remove(key) {
                if !allow_n_traj {
                    return Err(CliError::Usage(format!("unknown configuration key `{key}`")));
                }
                let n = v
                    .as_integer()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| CliError::Usage(format!("`{key}` must be a positive integer")))?;
                n_traj = Some(n as usize);
            }
        }
        let file_has_seed = table.contains_key("seed");
        let mut config: TrajectoryConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("configuration: {}", e.message())))?;
        self.apply(&mut config);
        let seed_from_entropy = !file_has_seed && self.seed.is_none();
        if seed_from_entropy {
            config.seed = rand::random();
        }
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Resolved {
            config,
            seed_from_entropy,
            n_traj,
        })
    }

    fn apply(&self, c: &mut TrajectoryConfig) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        set!(
            n_spins,
            kappa,
            dt,
            t_final,
            seed,
            model,
            engine,
            integrator,
            initial,
            record_every,
            stop_at_steady_state,
            diagnostics_every
        );
    }
}

/// Defaults as a TOML listing, for `--help`.
pub fn defaults_listing() -> String {
    let body = toml::to_string(&TrajectoryConfig::default()).expect("default configuration serializes");
    let body: String = body
        .lines()
        .filter(|l| !l.starts_with("seed"))
        .map(|l| format!("  {l}\n"))
        .collect();
    format!("Configuration defaults (seed: drawn from OS entropy):\n{body}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn flags_override_file() {
        let f = file("n_spins = 6\nkappa = 2.0\nseed = 5\nmodel = \"collective\"\n");
        let args = ConfigArgs {
            config: Some(f.path().into()),
            kappa: Some(3.0),
            ..Default::default()
        };
        let r = args.resolve(false).unwrap();
        assert_eq!(r.config.n_spins, 6);
        assert_eq!(r.config.kappa, 3.0);
        assert_eq!(r.config.model, ModelKind::Collective);
        assert_eq!(r.config.seed, 5);
        assert!(!r.seed_from_entropy);
    }

    #[test]
    fn unknown_keys_rejected() {
        let f = file("n_spin = 6\n");
        let args = ConfigArgs {
            config: Some(f.path().into()),
            ..Default::default()
        };
        let err = args.resolve(false).unwrap_err().to_string();
        assert!(err.contains("n_spin"), "{err}");
        let f = file("n_traj = 4\n");
        let args = ConfigArgs {
            config: Some(f.path().into()),
            ..Default::default()
        };
        assert!(args.resolve(false).is_err());
        assert_eq!(args.resolve(true).unwrap().n_traj, Some(4));
    }

    #[test]
    fn missing_seed_is_drawn() {
        let r = ConfigArgs::default().resolve(false).unwrap();
        assert!(r.seed_from_entropy);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let args = ConfigArgs {
            dt: Some(-1.0),
            seed: Some(1),
            ..Default::default()
        };
        assert!(matches!(args.resolve(false), Err(CliError::Usage(_))));
    }

    #[test]
    fn defaults_listing_names_every_key() {
        let text = defaults_listing();
        for key in ["n_spins", "kappa", "dt", "t_final", "model", "integrator", "record_every"] {
            assert!(text.contains(key), "{key}");
        }
    }
}
