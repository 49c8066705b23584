use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |M[i][j] - conj(M[j][i])| = {max_asymmetry:e}")]
    NotHermitian { max_asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off:e})")]
    EigenNotConverged { sweeps: usize, off: f64 },

    #[error("{model} has no coupling along the {axis} axis")]
    UnsupportedAxis { model: &'static str, axis: char },

    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    #[error("time {t} lies outside the sampled range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("derivative order {0} is not supported (use 1 or 2)")]
    InvalidOrder(u32),

    #[error("quadrature did not reach {target:e} after {panels} panels (estimate {estimate:e})")]
    QuadratureNotConverged { target: f64, panels: usize, estimate: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigen-pair ({p}, {q}) is not supported here")]
    UnsupportedPair { p: usize, q: usize },

    #[error("Fisher information undefined at a fringe extremum (P(1-P) = {0:e})")]
    FringeExtremum(f64),

    #[error("spectral gap {gap:e} is below the floor {floor:e} at t = {t}")]
    GapBelowFloor { gap: f64, floor: f64, t: f64 },

    #[error("eigenvector tracking lost continuity at t = {t} (best overlap {overlap:.3e})")]
    TrackingAmbiguity { t: f64, overlap: f64 },

    #[error("grid refinement stopped at {steps} steps without converging (last change {last_change:e})")]
    NotConverged { steps: usize, last_change: f64 },

    #[error("state is not normalised (norm {0})")]
    NotNormalized(f64),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical method (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenNotConverged { .. }
                | Error::QuadratureNotConverged { .. }
                | Error::GapBelowFloor { .. }
                | Error::TrackingAmbiguity { .. }
                | Error::NotConverged { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }
}
