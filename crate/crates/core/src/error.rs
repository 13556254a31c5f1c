use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("wavelength {lambda_nm} nm outside the valid range of {material} ({min_nm}-{max_nm} nm)")]
    WavelengthRange {
        material: String,
        lambda_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("invalid material record `{name}`: {reason}")]
    Material { name: String, reason: String },

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("material database parse error: {0}")]
    MaterialParse(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("value outside its domain: {0}")]
    Domain(String),

    #[error("invalid solver configuration: {0}")]
    Config(String),

    #[error("eigensolver did not converge after {iterations} restarts (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular pivot encountered during sparse factorization (front {front}, pivot {pivot})")]
    SingularPivot { front: usize, pivot: usize },

    #[error(
        "field of the mode at n_eff {n_eff:.5} is {ratio:.3e} of its peak at the window boundary (limit {limit:.1e}); enlarge the padding"
    )]
    InsufficientPadding { ratio: f64, limit: f64, n_eff: f64 },

    #[error("mode tracking ambiguous across wavelengths: best overlap {overlap:.4} < {threshold}")]
    ModeTracking { overlap: f64, threshold: f64 },

    #[error("no guided mode found at {lambda_nm} nm")]
    NoGuidedMode { lambda_nm: f64 },

    #[error("wavelength mismatch: mode solved at {mode_nm} nm, dipole at {dipole_nm} nm")]
    WavelengthMismatch { mode_nm: f64, dipole_nm: f64 },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("every sweep point failed; last error: {0}")]
    SweepFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
