use thiserror::Error;

/// Errors raised anywhere in the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("unknown tissue label `{0}`")]
    UnknownTissue(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("preconditioner error in subdomain {subdomain}: {reason}")]
    Preconditioner { subdomain: usize, reason: String },

    #[error("partition error: {0}")]
    Partition(String),

    #[error("transmitter {transmitter}: {source}")]
    Transmitter {
        transmitter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("normalization error: |S_empty[{0}][{1}]| = 0")]
    Normalization(usize, usize),

    #[error("optimization error: {0}")]
    Optimization(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Geometry(_) => "geometry",
            Error::Mesh(_) => "mesh",
            Error::UnknownTissue(_) => "unknown-tissue",
            Error::Assembly(_) => "assembly",
            Error::NonConvergence { .. } => "non-convergence",
            Error::Singular(_) => "singular",
            Error::Preconditioner { .. } => "preconditioner",
            Error::Partition(_) => "partition",
            Error::Transmitter { .. } => "transmitter",
            Error::Normalization(..) => "normalization",
            Error::Optimization(_) => "optimization",
            Error::Dimension(_) => "dimension",
            Error::Format(_) => "format",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
