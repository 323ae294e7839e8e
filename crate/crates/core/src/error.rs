use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("region error: {0}")]
    Region(String),
    #[error("line hits spectrum: distance {distance:.3e} below tolerance")]
    LineHitsSpectrum { distance: f64 },
    #[error(
        "Laplace route invalid (Re p = {re_p} <= spectral bound {bound}); use the dense oracle"
    )]
    LaplaceInvalid { re_p: f64, bound: f64 },
    #[error("ill-conditioned resolvent system (pivot ratio {ratio:.3e})")]
    Conditioning { ratio: f64 },
    #[error("sweep failed: {failed} of {total} frequency nodes failed")]
    Sweep { failed: usize, total: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
