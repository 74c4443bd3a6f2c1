use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient sites: need at least 3, got {0}")]
    InsufficientSites(usize),

    #[error("degenerate configuration: all sites are collinear")]
    DegenerateConfiguration,

    #[error("incomplete spin configuration: site {0} has no value")]
    IncompleteConfiguration(usize),

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("grid resolution {rho} must exceed epsilon {epsilon}")]
    ResolutionTooFine { rho: f64, epsilon: f64 },

    #[error("no eligible vertex for projection")]
    EmptyTarget,

    #[error("vertices are disconnected (component sizes {0} and {1})")]
    Disconnected(usize, usize),

    #[error("window too small: need half-width >= {needed}, have {have}")]
    WindowTooSmall { needed: f64, have: f64 },

    #[error("rectangle exits the core window")]
    OutOfCore,

    #[error("target polygon exits the required margin")]
    OutOfMargin,

    #[error("alpha too large: rejection rate {0:.2} exceeds 0.5")]
    AlphaTooLarge(f64),

    #[error("cell union is not connected")]
    DisconnectedUnion,

    #[error("unbounded cell: clip or exclude before measuring")]
    UnboundedCell,

    #[error("bad tessellation file: {0}")]
    BadTessellationFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
