//! Propagation-based phase-contrast imaging: Fourier-space phase retrieval
//! with continuous and discrete Laplacian filters, a linearised TIE forward
//! simulator, parallel-beam CT, and edge-based resolution metrology.

pub mod ct;
pub mod error;
mod fft;
pub mod filters;
pub mod grid;
pub mod metrology;
pub mod retrieval;
pub mod simulate;

pub use error::{Error, PearsonParams, Result};
pub use grid::{Image2D, Variant};
