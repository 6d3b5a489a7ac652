use thiserror::Error;

/// Parameters of a Pearson VII line profile, reported alongside a failed fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearsonParams {
    pub amplitude: f64,
    pub center: f64,
    pub fwhm: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("singular material pair: mu2 equals mu1 ({mu})")]
    SingularPair { mu: f64 },
    #[error(
        "negative two-material coefficient {coefficient:e} m^2: (delta2 - delta1)/(mu2 - mu1) must be \
         non-negative; swap the materials so the embedded material is mat2"
    )]
    MaterialOrdering { coefficient: f64 },
    #[error("singular 2x2 decomposition system at frequency index (x={ix}, y={iy})")]
    SingularSystem { ix: usize, iy: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("Pearson VII fit did not converge after {iterations} iterations (rms residual {residual_rms:e})")]
    FitFailure {
        best: PearsonParams,
        residual_rms: f64,
        iterations: usize,
    },
    #[error("SNR undefined: region has zero variance")]
    UndefinedSnr,
}

pub type Result<T> = std::result::Result<T, Error>;
