use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular configuration: ions {i} and {j} are separated by {separation:e} rad")]
    Singular { i: usize, j: usize, separation: f64 },

    #[error("minimization did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },

    #[error("minimization failed for N = {ions}: {source}")]
    ScanFailed {
        ions: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("barrier profile incomplete: continuation failed at grid index {index}")]
    PartialProfile { index: usize },

    #[error("barrier is not monotone in the field: V_B({lower} V/m) = {v_lower:e} J > V_B({upper} V/m) = {v_upper:e} J")]
    NonMonotoneBarrier {
        lower: f64,
        upper: f64,
        v_lower: f64,
        v_upper: f64,
    },

    #[error("quadrature did not converge: error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("no pseudopotential minimum found above the electrode plane: {0}")]
    NoTrapMinimum(String),

    #[error("compensation response is rank deficient (rank {rank}, residual {residual:e} V/m)")]
    RankDeficient { rank: usize, residual: f64 },

    #[error("integration unstable: {0}")]
    Unstable(String),

    #[error("{0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category used by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) | Error::Config(_) => "config",
            Error::Singular { .. } => "singular",
            Error::NotConverged { .. } | Error::ScanFailed { .. } => "convergence",
            Error::PartialProfile { .. } | Error::NonMonotoneBarrier { .. } => "barrier",
            Error::Quadrature { .. } | Error::NoTrapMinimum(_) | Error::RankDeficient { .. } => {
                "electrostatics"
            }
            Error::Unstable(_) => "dynamics",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code for the category.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" => 4,
            _ => 3,
        }
    }
}
