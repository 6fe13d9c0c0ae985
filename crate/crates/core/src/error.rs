use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// An observed or imputed value has (numerically) zero probability under
    /// the conditioned model. `site` is the zero-based time index.
    #[error("near-zero probability {probability:e} at time step {site}")]
    NearZeroProbability { site: usize, probability: f64 },

    /// Some training instance has exactly zero overlap with the model, so the
    /// log-likelihood is unbounded.
    #[error("infinite loss: instance {instance} has zero overlap with the model")]
    InfiniteLoss { instance: usize },

    /// The gradient vanished; the caller should leave the tensor as is.
    #[error("zero-norm gradient, update skipped")]
    ZeroGradient,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported model format version {found} (this build reads version {expected})")]
    Version { found: u32, expected: u32 },

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("empty result: {0}")]
    Empty(String),

    #[error("instance {index}: {source}")]
    Instance {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_instance(self, index: usize) -> Self {
        Error::Instance {
            index,
            source: Box::new(self),
        }
    }

    /// True for failures caused by the numbers themselves rather than by the
    /// caller's inputs or files.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric(_)
            | Error::NearZeroProbability { .. }
            | Error::InfiniteLoss { .. }
            | Error::ZeroGradient
            | Error::Empty(_) => true,
            Error::Instance { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
