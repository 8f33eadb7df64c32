use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("singular geometry: landmark coincides with the vehicle position")]
    SingularGeometry,

    #[error("world generation failed for seed {seed}: {reason}")]
    Generation { seed: u64, reason: String },

    #[error("data association error: {0}")]
    Association(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("frequency {0} Hz is outside both sensing bands")]
    Classification(f64),

    #[error("degenerate particle set: all weights are zero")]
    DegenerateWeights,

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub(crate) fn ensure_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} contains non-finite values")))
    }
}
