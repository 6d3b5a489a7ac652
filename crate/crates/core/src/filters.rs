//! Retrieval transfer functions, the Gaussian detector OTF, and the
//! comparison maps (ratio and fractional differences) between the
//! continuous-k and discrete-Laplacian filters.

use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, Variant};
use std::f64::consts::PI;

/// `2 sqrt(2 ln 2)`, FWHM of a unit-sigma Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Strength and operator of a Lorentzian-type retrieval filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    /// `delta*Delta/mu` (or the two-material difference form), m^2.
    pub coefficient: f64,
    pub variant: Variant,
}

impl FilterParams {
    pub fn new(coefficient: f64, variant: Variant) -> Result<Self> {
        if !(coefficient >= 0.0) || !coefficient.is_finite() {
            return Err(Error::Config(format!(
                "filter coefficient must be finite and non-negative, got {coefficient}"
            )));
        }
        Ok(FilterParams {
            coefficient,
            variant,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Continuous-k retrieval filter.
    Pm,
    /// Discrete-Laplacian retrieval filter.
    Gpm,
    GaussianOtf,
    Product,
    Ratio,
    FractionalDifference,
    CombinedFractionalDifference,
}

/// Real map sampled on a DFT frequency layout.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMap {
    pub width: usize,
    pub height: usize,
    pub pixel_size: f64,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl TransferMap {
    fn from_grid(
        grid: &FrequencyGrid,
        provenance: Provenance,
        f: impl Fn(usize, usize) -> f64,
    ) -> TransferMap {
        let mut values = Vec::with_capacity(grid.width() * grid.height());
        for iy in 0..grid.height() {
            for ix in 0..grid.width() {
                values.push(f(ix, iy));
            }
        }
        TransferMap {
            width: grid.width(),
            height: grid.height(),
            pixel_size: grid.pixel_size(),
            values,
            provenance,
        }
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.width + ix]
    }

    /// Pointwise product, e.g. a retrieval filter combined with a detector OTF.
    pub fn product(&self, other: &TransferMap) -> Result<TransferMap> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} and {}x{} maps",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(TransferMap {
            width: self.width,
            height: self.height,
            pixel_size: self.pixel_size,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
            provenance: Provenance::Product,
        })
    }
}

/// `1 / (1 + coefficient * ksq)`.
#[inline]
pub fn lorentzian(coefficient: f64, ksq: f64) -> f64 {
    1.0 / (1.0 + coefficient * ksq)
}

/// Fourier transform of a unit-area Gaussian PSF with the given real-space
/// FWHM (meters) at angular frequency magnitude squared `k2`.
#[inline]
pub fn gaussian_otf_value(k2: f64, fwhm: f64) -> f64 {
    let sigma = fwhm / FWHM_PER_SIGMA;
    (-0.5 * sigma * sigma * k2).exp()
}

pub fn retrieval_transfer(grid: &FrequencyGrid, params: &FilterParams) -> Result<TransferMap> {
    if grid.variant() != params.variant {
        return Err(Error::Config(format!(
            "grid is {} but filter is {}",
            grid.variant().name(),
            params.variant.name()
        )));
    }
    let provenance = match params.variant {
        Variant::Continuous => Provenance::Pm,
        Variant::Discrete => Provenance::Gpm,
    };
    let c = params.coefficient;
    Ok(TransferMap::from_grid(grid, provenance, |ix, iy| {
        lorentzian(c, grid.ksq(ix, iy))
    }))
}

/// Gaussian detector OTF whose real-space PSF has FWHM `fwhm_px * W`.
/// Uses the physical `k_x^2 + k_y^2` whatever the grid variant.
pub fn gaussian_otf(grid: &FrequencyGrid, fwhm_px: f64) -> Result<TransferMap> {
    if !(fwhm_px > 0.0) || !fwhm_px.is_finite() {
        return Err(Error::InvalidInput(format!(
            "PSF FWHM must be positive, got {fwhm_px}"
        )));
    }
    let fwhm = fwhm_px * grid.pixel_size();
    Ok(TransferMap::from_grid(
        grid,
        Provenance::GaussianOtf,
        |ix, iy| gaussian_otf_value(grid.k_squared(ix, iy), fwhm),
    ))
}

fn pair_grids(grid: &FrequencyGrid) -> (FrequencyGrid, FrequencyGrid) {
    (
        grid.with_variant(Variant::Continuous),
        grid.with_variant(Variant::Discrete),
    )
}

/// `H_GPM / H_PM`.
pub fn filter_ratio(
    grid: &FrequencyGrid,
    params_pm: &FilterParams,
    params_gpm: &FilterParams,
) -> Result<TransferMap> {
    if params_pm.coefficient != params_gpm.coefficient {
        return Err(Error::Config(format!(
            "ratio needs equal coefficients, got {} and {}",
            params_pm.coefficient, params_gpm.coefficient
        )));
    }
    if params_pm.variant != Variant::Continuous || params_gpm.variant != Variant::Discrete {
        return Err(Error::Config(
            "ratio compares a continuous filter against a discrete one".into(),
        ));
    }
    let c = params_pm.coefficient;
    let (cont, disc) = pair_grids(grid);
    Ok(TransferMap::from_grid(grid, Provenance::Ratio, |ix, iy| {
        (1.0 + c * cont.ksq(ix, iy)) / (1.0 + c * disc.ksq(ix, iy))
    }))
}

/// `(H_GPM - H_PM)/H_PM`, optionally with both filters multiplied by a
/// Gaussian OTF of `psf_fwhm_px` pixels (the denominator stays unblurred).
pub fn fractional_difference(
    grid: &FrequencyGrid,
    coefficient: f64,
    psf_fwhm_px: Option<f64>,
) -> Result<TransferMap> {
    let params = FilterParams::new(coefficient, Variant::Continuous)?;
    let c = params.coefficient;
    let (cont, disc) = pair_grids(grid);
    // (1 + c kC)/(1 + c kD) - 1 rewritten to avoid cancellation.
    let d = move |ix: usize, iy: usize| {
        let kc = cont.ksq(ix, iy);
        let kd = disc.ksq(ix, iy);
        c * (kc - kd) / (1.0 + c * kd)
    };
    match psf_fwhm_px {
        None => Ok(TransferMap::from_grid(
            grid,
            Provenance::FractionalDifference,
            d,
        )),
        Some(fwhm_px) => {
            let otf = gaussian_otf(grid, fwhm_px)?;
            Ok(TransferMap::from_grid(
                grid,
                Provenance::CombinedFractionalDifference,
                |ix, iy| d(ix, iy) * otf.get(ix, iy),
            ))
        }
    }
}

/// Anything sampled on a square-or-rectangular DFT frequency layout.
pub trait FrequencySamples {
    fn dims(&self) -> (usize, usize);
    fn sample(&self, ix: usize, iy: usize) -> f64;
}

impl FrequencySamples for TransferMap {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn sample(&self, ix: usize, iy: usize) -> f64 {
        self.get(ix, iy)
    }
}

impl FrequencySamples for FrequencyGrid {
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    fn sample(&self, ix: usize, iy: usize) -> f64 {
        self.ksq(ix, iy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvePath {
    /// `k_y = 0`, abscissa `W k_x` in `[0, pi]`.
    Axis,
    /// `k_x = k_y`, abscissa `W sqrt(k_x^2 + k_y^2)` in `[0, pi sqrt 2]`.
    Diagonal,
}

/// 1-D slice of a map as `(normalized_k, value)` pairs from DC outwards.
pub fn curve_extract<M: FrequencySamples + ?Sized>(
    map: &M,
    path: CurvePath,
) -> Result<Vec<(f64, f64)>> {
    let (w, h) = map.dims();
    match path {
        CurvePath::Axis => Ok((0..=w / 2)
            .map(|i| (2.0 * PI * i as f64 / w as f64, map.sample(i, 0)))
            .collect()),
        CurvePath::Diagonal => {
            if w != h {
                return Err(Error::Dimension(format!(
                    "diagonal curve needs a square map, got {w}x{h}"
                )));
            }
            Ok((0..=w / 2)
                .map(|i| {
                    (
                        std::f64::consts::SQRT_2 * 2.0 * PI * i as f64 / w as f64,
                        map.sample(i, i),
                    )
                })
                .collect())
        }
    }
}
