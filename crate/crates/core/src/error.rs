use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: usize, right: usize },

    #[error("composition error: {0}")]
    Composition(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("charge sector {sector} is empty (weight {weight:.3e})")]
    EmptySector { sector: usize, weight: f64 },

    #[error("reduction onto frame {frame} at origin {origin} has vanishing norm")]
    Reduction { frame: String, origin: usize },

    #[error("branch phase extraction failed: {0}")]
    Extraction(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("frames are perfectly localised relative to one another: {0}")]
    Localization(String),

    #[error("numerically indeterminate: {0}")]
    Indeterminate(String),
}
