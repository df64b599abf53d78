use thiserror::Error;

/// Errors raised anywhere along the simulated link.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported PRBS order {0} (supported: 7, 15, 23, 31)")]
    UnsupportedPrbsOrder(u32),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("negative optical power {0} W")]
    NegativePower(f64),

    #[error("degenerate spectrum: frequency-offset estimate is undefined")]
    DegenerateSpectrum,

    #[error("singular pilot system: affine equalizer cannot be fitted")]
    SingularPilots,

    #[error("non-finite activation in layer `{layer}`")]
    NonFinite { layer: String },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
