use thiserror::Error;

/// Errors raised while building the atomic model, couplings and relaxation
/// tables.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid quantum numbers: {0}")]
    InvalidQuantumNumbers(String),

    #[error("sublevel index {0} outside 1..=32")]
    IndexOutOfRange(usize),

    #[error("sublevel {index} is not a {expected} sublevel")]
    WrongManifold { index: usize, expected: &'static str },

    #[error("constants file, line {line}: {message}")]
    ConstantsParse { line: usize, message: String },

    #[error("constants file is missing `{0}`")]
    MissingConstant(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors from Liouvillian assembly, steady-state solves and time
/// evolution.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("steady-state system is singular (condition estimate {condition_estimate:.3e})")]
    Singular { condition_estimate: f64 },

    #[error(
        "steady-state residual {residual:.3e} exceeds bound {bound:.3e} (condition estimate {condition_estimate:.3e})"
    )]
    ResidualTooLarge {
        residual: f64,
        bound: f64,
        condition_estimate: f64,
    },

    #[error("time evolution unstable: {0}")]
    Unstable(String),
}

/// Errors from spectrum scans, sweeps and fits.
#[derive(Debug, Error)]
pub enum ScanError {
    #[error("invalid scan configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("solve failed at Raman detuning {raman_hz:.6} Hz: {source}")]
    Solver {
        raman_hz: f64,
        #[source]
        source: SolverError,
    },

    #[error("solver setup failed: {0}")]
    Setup(#[source] SolverError),

    #[error("relaxation-ratio fit refused: {0}")]
    Fit(String),

    #[error("reference spectrum: {0}")]
    Reference(String),
}
