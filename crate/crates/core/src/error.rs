use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate domain: width {width}, height {height}")]
    DegenerateDomain { width: f64, height: f64 },

    #[error("nonconforming mesh: {0}")]
    NonConforming(String),

    #[error("field has {found} elements but the mesh has {expected}")]
    MeshMismatch { expected: usize, found: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("reconstruction residual {residual:.3e} on side {side} exceeds tolerance {tol:.3e}")]
    Reconstruction { side: usize, residual: f64, tol: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
