use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A quantum number outside its allowed range or with the wrong parity.
    #[error("domain error: {0}")]
    Domain(String),

    /// A request larger than the implementation supports.
    #[error("capacity exceeded: {what} = {requested} (max {max})")]
    Capacity {
        what: &'static str,
        requested: usize,
        max: usize,
    },

    /// Objects built for different layouts, or otherwise inconsistent inputs.
    #[error("usage error: {0}")]
    Usage(String),

    /// The integrator lost more trace in one step than it can repair.
    #[error("step-size error{}: trace drift {drift:.3e} in one step; reduce dt",
        time.map(|t| format!(" at t = {t}")).unwrap_or_default())]
    StepSize { time: Option<f64>, drift: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("snapshot parse error (line {line}): {msg}")]
    Snapshot { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
