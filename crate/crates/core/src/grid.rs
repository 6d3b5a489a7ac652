//! Rasters, DFT conventions, frequency grids and block resampling.
//!
//! Frequencies are angular (`k = 2*pi*f`, rad/m). Spectra use the unshifted
//! layout: DC at index (0, 0), index `i` maps to the signed frequency index
//! `i` for `i < (n+1)/2` and `i - n` otherwise.

use crate::error::{Error, Result};
use crate::fft;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Which squared-frequency operator a filter uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `k_x^2 + k_y^2`, the continuous Fourier derivative theorem.
    Continuous,
    /// Eigenvalues of the negated five-point Laplacian at spacing `W`.
    Discrete,
}

impl Variant {
    pub fn other(self) -> Variant {
        match self {
            Variant::Continuous => Variant::Discrete,
            Variant::Discrete => Variant::Continuous,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Continuous => "continuous",
            Variant::Discrete => "discrete",
        }
    }
}

/// Real-valued raster with a physical pixel pitch. Samples are row-major,
/// `height` rows of `width` samples, and always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    width: usize,
    height: usize,
    pixel_size: f64,
    samples: Vec<f64>,
}

impl Image2D {
    pub fn new(width: usize, height: usize, pixel_size: f64, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "image must be non-empty, got {width}x{height}"
            )));
        }
        if !(pixel_size > 0.0) || !pixel_size.is_finite() {
            return Err(Error::InvalidInput(format!(
                "pixel size must be positive and finite, got {pixel_size}"
            )));
        }
        if samples.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} samples supplied for a {width}x{height} image",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite sample {} at ({}, {})",
                samples[i],
                i % width,
                i / width
            )));
        }
        Ok(Image2D {
            width,
            height,
            pixel_size,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, pixel_size: f64, value: f64) -> Result<Self> {
        Image2D::new(width, height, pixel_size, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        pixel_size: f64,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Image2D::new(width, height, pixel_size, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Pixel pitch `W` in meters.
    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.samples[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.samples[y * self.width..(y + 1) * self.width]
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn same_shape(&self, other: &Image2D) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.samples.len() as f64
    }

    /// Applies `f` to every sample; fails if any result is non-finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Image2D> {
        Image2D::new(
            self.width,
            self.height,
            self.pixel_size,
            self.samples.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Same geometry, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Image2D> {
        Image2D::new(self.width, self.height, self.pixel_size, samples)
    }

    pub(crate) fn require_grid_size(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::Dimension(format!(
                "frequency-domain operations need at least 2x2 pixels, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Full complex spectrum of an [`Image2D`] in the unshifted DFT layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    pub width: usize,
    pub height: usize,
    /// Pitch of the originating image, kept so the inverse can rebuild it.
    pub pixel_size: f64,
    pub values: Vec<Complex64>,
}

impl Spectrum2D {
    pub fn get(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[iy * self.width + ix]
    }

    /// Inverse transform keeping the imaginary part.
    pub fn inverse_complex(&self) -> Vec<Complex64> {
        let mut data = self.values.clone();
        fft::fft2_complex(&mut data, self.width, self.height, true);
        data
    }
}

/// Unnormalised forward 2-D DFT.
pub fn dft2(img: &Image2D) -> Spectrum2D {
    let mut values: Vec<Complex64> = img
        .samples
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft::fft2_complex(&mut values, img.width, img.height, false);
    Spectrum2D {
        width: img.width,
        height: img.height,
        pixel_size: img.pixel_size,
        values,
    }
}

/// Inverse 2-D DFT (with the `1/(width*height)` factor), real part.
pub fn idft2(spec: &Spectrum2D) -> Result<Image2D> {
    let data = spec.inverse_complex();
    Image2D::new(
        spec.width,
        spec.height,
        spec.pixel_size,
        data.iter().map(|c| c.re).collect(),
    )
}

/// Signed frequency index of DFT bin `i` out of `n`.
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i < (n + 1) / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Angular frequencies `2*pi*m/(n*W)` for every bin of an `n`-point axis.
pub fn axis_frequencies(n: usize, pixel_size: f64) -> Vec<f64> {
    (0..n)
        .map(|i| 2.0 * PI * signed_index(i, n) as f64 / (n as f64 * pixel_size))
        .collect()
}

/// Single-axis contribution to `ksq`. The discrete form is written as
/// `4 sin^2(Wk/2)/W^2`, equal to `(2/W^2)(1 - cos Wk)` without the
/// cancellation near DC.
pub fn axis_ksq(k: f64, pixel_size: f64, variant: Variant) -> f64 {
    match variant {
        Variant::Continuous => k * k,
        Variant::Discrete => {
            let s = (0.5 * pixel_size * k).sin();
            4.0 * s * s / (pixel_size * pixel_size)
        }
    }
}

/// Squared transverse frequencies for one raster geometry. Both variants are
/// separable, so only the per-axis terms are stored; the full array is
/// available through [`FrequencyGrid::ksq_values`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    width: usize,
    height: usize,
    pixel_size: f64,
    variant: Variant,
    kx: Vec<f64>,
    ky: Vec<f64>,
    term_x: Vec<f64>,
    term_y: Vec<f64>,
}

impl FrequencyGrid {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn kx(&self) -> &[f64] {
        &self.kx
    }

    pub fn ky(&self) -> &[f64] {
        &self.ky
    }

    /// `ksq` at DFT bin (ix, iy), rad^2/m^2.
    #[inline]
    pub fn ksq(&self, ix: usize, iy: usize) -> f64 {
        self.term_x[ix] + self.term_y[iy]
    }

    /// Continuous `k_x^2 + k_y^2` at (ix, iy) regardless of the variant.
    #[inline]
    pub fn k_squared(&self, ix: usize, iy: usize) -> f64 {
        self.kx[ix] * self.kx[ix] + self.ky[iy] * self.ky[iy]
    }

    /// Row-major `height x width` array of `ksq`.
    pub fn ksq_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width * self.height);
        for iy in 0..self.height {
            for ix in 0..self.width {
                out.push(self.ksq(ix, iy));
            }
        }
        out
    }

    /// Same geometry, other operator.
    pub fn with_variant(&self, variant: Variant) -> FrequencyGrid {
        frequency_grid(self.width, self.height, self.pixel_size, variant)
            .expect("geometry already validated")
    }

    pub fn matches(&self, img: &Image2D) -> bool {
        self.width == img.width()
            && self.height == img.height()
            && (self.pixel_size - img.pixel_size()).abs() <= 1e-12 * self.pixel_size
    }
}

/// Builds the `ksq` grid for an `n_x x n_y` raster with pitch `W`.
pub fn frequency_grid(
    n_x: usize,
    n_y: usize,
    pixel_size: f64,
    variant: Variant,
) -> Result<FrequencyGrid> {
    if n_x < 2 || n_y < 2 {
        return Err(Error::Dimension(format!(
            "frequency grid needs at least 2x2 samples, got {n_x}x{n_y}"
        )));
    }
    if !(pixel_size > 0.0) || !pixel_size.is_finite() {
        return Err(Error::InvalidInput(format!(
            "pixel size must be positive, got {pixel_size}"
        )));
    }
    let kx = axis_frequencies(n_x, pixel_size);
    let ky = axis_frequencies(n_y, pixel_size);
    let term_x = kx
        .iter()
        .map(|&k| axis_ksq(k, pixel_size, variant))
        .collect();
    let term_y = ky
        .iter()
        .map(|&k| axis_ksq(k, pixel_size, variant))
        .collect();
    Ok(FrequencyGrid {
        width: n_x,
        height: n_y,
        pixel_size,
        variant,
        kx,
        ky,
        term_x,
        term_y,
    })
}

/// Grid matching an image's geometry.
pub fn grid_for(img: &Image2D, variant: Variant) -> Result<FrequencyGrid> {
    frequency_grid(img.width(), img.height(), img.pixel_size(), variant)
}

/// Block mean over `n x n` tiles; the pitch grows by `n`.
pub fn rebin(img: &Image2D, n: usize) -> Result<Image2D> {
    if n == 0 {
        return Err(Error::Dimension("rebin factor must be at least 1".into()));
    }
    if img.width % n != 0 || img.height % n != 0 {
        return Err(Error::Dimension(format!(
            "rebin factor {n} does not divide {}x{}",
            img.width, img.height
        )));
    }
    if n == 1 {
        return Ok(img.clone());
    }
    let (ow, oh) = (img.width / n, img.height / n);
    let mut out = vec![0.0; ow * oh];
    for y in 0..img.height {
        let orow = &mut out[(y / n) * ow..(y / n + 1) * ow];
        for (x, v) in img.row(y).iter().enumerate() {
            orow[x / n] += v;
        }
    }
    let norm = (n * n) as f64;
    out.iter_mut().for_each(|v| *v /= norm);
    Image2D::new(ow, oh, img.pixel_size * n as f64, out)
}

/// Returns a supersampled raster to detector pitch. Same block mean as
/// [`rebin`].
pub fn block_downsample(img: &Image2D, factor: usize) -> Result<Image2D> {
    rebin(img, factor)
}
