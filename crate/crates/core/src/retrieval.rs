//! Single-material, two-material and dual-energy phase retrieval.

use crate::error::{Error, Result};
use crate::fft;
use crate::filters::lorentzian;
use crate::grid::{axis_frequencies, axis_ksq, grid_for, Image2D, Variant};
use num_complex::Complex64;
use std::f64::consts::PI;

/// CODATA 2018 values (SI unless noted).
pub mod constants {
    /// Planck constant, J s.
    pub const PLANCK: f64 = 6.626_070_15e-34;
    /// Speed of light, m/s.
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    /// Classical electron radius, m.
    pub const ELECTRON_RADIUS: f64 = 2.817_940_326_2e-15;
    /// Electron rest energy, eV.
    pub const ELECTRON_REST_ENERGY_EV: f64 = 510_998.950_00;
    /// Elementary charge, C (J per eV).
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    /// Avogadro constant, 1/mol.
    pub const AVOGADRO: f64 = 6.022_140_76e23;
    /// Thomson cross-section `(8/3) pi r_e^2`, m^2.
    pub const THOMSON: f64 = 6.652_458_732_1e-29;
}

use constants::*;

/// Photon wavelength in meters for an energy in eV.
pub fn wavelength(energy_ev: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / (energy_ev * ELEMENTARY_CHARGE)
}

/// `delta = r_e lambda^2 n_e / (2 pi)` for an electron density in 1/m^3.
pub fn delta_from_electron_density(electron_density: f64, energy_ev: f64) -> f64 {
    let lambda = wavelength(energy_ev);
    ELECTRON_RADIUS * lambda * lambda * electron_density / (2.0 * PI)
}

/// Optical constants of one substance at one photon energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    /// Refractive index decrement.
    pub delta: f64,
    /// Absorption index.
    pub beta: f64,
    /// Linear attenuation coefficient, 1/m.
    pub mu: f64,
    pub energy_ev: f64,
}

impl Material {
    /// Checks non-negativity and `mu = 4 pi beta / lambda` to 1e-6.
    pub fn new(delta: f64, beta: f64, mu: f64, energy_ev: f64) -> Result<Self> {
        for (name, v) in [("delta", delta), ("beta", beta), ("mu", mu)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !(energy_ev > 0.0) {
            return Err(Error::InvalidInput(format!(
                "energy must be positive, got {energy_ev} eV"
            )));
        }
        let implied = 4.0 * PI * beta / wavelength(energy_ev);
        if (implied - mu).abs() > 1e-6 * mu.max(implied) {
            return Err(Error::InvalidInput(format!(
                "mu = {mu} 1/m is inconsistent with beta = {beta:e} at {energy_ev} eV (implies {implied})"
            )));
        }
        Ok(Material {
            delta,
            beta,
            mu,
            energy_ev,
        })
    }

    /// Derives `beta` from `mu`.
    pub fn from_attenuation(delta: f64, mu: f64, energy_ev: f64) -> Result<Self> {
        let beta = mu * wavelength(energy_ev) / (4.0 * PI);
        Material::new(delta, beta, mu, energy_ev)
    }

    /// `delta` from the electron density of a compound with mass density
    /// `density` (g/cm^3) and mean `Z/A` (mol/g); `mu` from a mass attenuation
    /// coefficient (cm^2/g).
    pub fn from_composition(
        density: f64,
        z_over_a: f64,
        mass_attenuation: f64,
        energy_ev: f64,
    ) -> Result<Self> {
        let electron_density = density * 1e6 * AVOGADRO * z_over_a;
        let delta = delta_from_electron_density(electron_density, energy_ev);
        let mu = mass_attenuation * density * 100.0;
        Material::from_attenuation(delta, mu, energy_ev)
    }

    pub fn wavelength(&self) -> f64 {
        wavelength(self.energy_ev)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalConfig {
    /// Propagation distance `Delta`, m.
    pub distance: f64,
    /// Detector pitch `W`, m.
    pub pixel_size: f64,
    /// Flat-field intensity `I_0`, image units.
    pub incident_intensity: f64,
    pub variant: Variant,
    /// Filter strength, m^2.
    pub coefficient: f64,
}

impl RetrievalConfig {
    pub fn new(
        distance: f64,
        pixel_size: f64,
        incident_intensity: f64,
        variant: Variant,
        coefficient: f64,
    ) -> Result<Self> {
        let cfg = RetrievalConfig {
            distance,
            pixel_size,
            incident_intensity,
            variant,
            coefficient,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Single-material filter, `coefficient = delta * Delta / mu`.
    pub fn for_material(
        mat: &Material,
        distance: f64,
        pixel_size: f64,
        incident_intensity: f64,
        variant: Variant,
    ) -> Result<Self> {
        if mat.mu <= 0.0 {
            return Err(Error::Config("material has zero attenuation".into()));
        }
        RetrievalConfig::new(
            distance,
            pixel_size,
            incident_intensity,
            variant,
            mat.delta * distance / mat.mu,
        )
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        RetrievalConfig { variant, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance >= 0.0) || !self.distance.is_finite() {
            return Err(Error::Config(format!(
                "distance must be non-negative, got {}",
                self.distance
            )));
        }
        if !(self.pixel_size > 0.0) || !self.pixel_size.is_finite() {
            return Err(Error::Config(format!(
                "pixel size must be positive, got {}",
                self.pixel_size
            )));
        }
        if !(self.incident_intensity > 0.0) || !self.incident_intensity.is_finite() {
            return Err(Error::Config(format!(
                "incident intensity must be positive, got {}",
                self.incident_intensity
            )));
        }
        if !(self.coefficient >= 0.0) || !self.coefficient.is_finite() {
            return Err(Error::Config(format!(
                "coefficient must be non-negative, got {}",
                self.coefficient
            )));
        }
        Ok(())
    }
}

/// `I_0 * F^-1[ F(img/I_0) / (1 + coefficient * ksq) ]`.
pub fn retrieve(img: &Image2D, cfg: &RetrievalConfig) -> Result<Image2D> {
    cfg.validate()?;
    if (img.pixel_size() - cfg.pixel_size).abs() > 1e-9 * cfg.pixel_size {
        return Err(Error::Config(format!(
            "image pitch {} m differs from configured pitch {} m",
            img.pixel_size(),
            cfg.pixel_size
        )));
    }
    if cfg.coefficient == 0.0 {
        return Ok(img.clone());
    }
    img.require_grid_size()?;
    let grid = grid_for(img, cfg.variant)?;
    let i0 = cfg.incident_intensity;
    let normalised: Vec<f64> = img.samples().iter().map(|v| v / i0).collect();
    let c = cfg.coefficient;
    let mut out = fft::filter_real(&normalised, img.width(), img.height(), |ix, iy| {
        lorentzian(c, grid.ksq(ix, iy))
    });
    out.iter_mut().for_each(|v| *v *= i0);
    img.with_samples(out)
}

/// Row-wise 1-D analog of [`retrieve`] on a row-major buffer of `width`-long
/// lines (each line periodic). The single-axis `ksq` term replaces the 2-D sum.
pub fn retrieve_rows(samples: &[f64], width: usize, cfg: &RetrievalConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if width < 2 || samples.len() % width != 0 {
        return Err(Error::Dimension(format!(
            "{} samples are not a whole number of {width}-wide rows",
            samples.len()
        )));
    }
    if cfg.coefficient == 0.0 {
        return Ok(samples.to_vec());
    }
    let i0 = cfg.incident_intensity;
    let multiplier: Vec<f64> = axis_frequencies(width, cfg.pixel_size)[..width / 2 + 1]
        .iter()
        .map(|&k| lorentzian(cfg.coefficient, axis_ksq(k, cfg.pixel_size, cfg.variant)))
        .collect();
    let mut out: Vec<f64> = samples.iter().map(|v| v / i0).collect();
    fft::filter_rows(&mut out, width, &multiplier);
    out.iter_mut().for_each(|v| *v *= i0);
    Ok(out)
}

/// Coefficient `(delta2 - delta1) * Delta / (mu2 - mu1)` for material 2
/// embedded in material 1.
pub fn two_material_coefficient(mat1: &Material, mat2: &Material, distance: f64) -> Result<f64> {
    let dmu = mat2.mu - mat1.mu;
    if dmu == 0.0 {
        return Err(Error::SingularPair { mu: mat1.mu });
    }
    let coefficient = (mat2.delta - mat1.delta) * distance / dmu;
    if coefficient < 0.0 {
        return Err(Error::MaterialOrdering { coefficient });
    }
    // -0.0 from a zero delta difference over a negative mu difference.
    Ok(coefficient.abs())
}

/// Retrieval at an interface between two known materials. `cfg.coefficient`
/// is replaced by the two-material coefficient.
pub fn retrieve_two_material(
    img: &Image2D,
    mat1: &Material,
    mat2: &Material,
    cfg: &RetrievalConfig,
) -> Result<Image2D> {
    let coefficient = two_material_coefficient(mat1, mat2, cfg.distance)?;
    retrieve(
        img,
        &RetrievalConfig {
            coefficient,
            ..*cfg
        },
    )
}

const KN_SERIES_LIMIT: f64 = 0.02;
/// Taylor coefficients of the Klein-Nishina / Thomson ratio in `E / m_e c^2`.
const KN_SERIES: [f64; 12] = [
    1.0,
    -2.0,
    26.0 / 5.0,
    -133.0 / 10.0,
    1144.0 / 35.0,
    -544.0 / 7.0,
    3784.0 / 21.0,
    -6148.0 / 15.0,
    151552.0 / 165.0,
    -111872.0 / 55.0,
    637952.0 / 143.0,
    -883328.0 / 91.0,
];

/// Total Klein-Nishina cross-section per electron, m^2.
pub fn klein_nishina(energy_ev: f64) -> Result<f64> {
    if !(energy_ev > 0.0) || !energy_ev.is_finite() {
        return Err(Error::Domain(format!(
            "energy must be positive, got {energy_ev} eV"
        )));
    }
    let k = energy_ev / ELECTRON_REST_ENERGY_EV;
    if k < KN_SERIES_LIMIT {
        // Low-energy expansion; the closed form cancels badly here.
        let ratio = KN_SERIES.iter().rev().fold(0.0, |acc, c| acc * k + c);
        return Ok(THOMSON * ratio);
    }
    let l = (1.0 + 2.0 * k).ln();
    let a = (1.0 + k) / (k * k) * (2.0 * (1.0 + k) / (1.0 + 2.0 * k) - l / k);
    let b = l / (2.0 * k);
    let c = (1.0 + 3.0 * k) / ((1.0 + 2.0 * k) * (1.0 + 2.0 * k));
    Ok(2.0 * PI * ELECTRON_RADIUS * ELECTRON_RADIUS * (a + b - c))
}

/// Reference energy for the photoelectric basis `(E / 1 keV)^-3`.
pub const PHOTO_REFERENCE_EV: f64 = 1000.0;

/// Photoelectric basis function. `P` carries the matching units, so
/// `P * photoelectric_basis(E)` is a dimensionless log-attenuation.
pub fn photoelectric_basis(energy_ev: f64) -> f64 {
    (energy_ev / PHOTO_REFERENCE_EV).powi(-3)
}

/// Phase-coupling coefficient `h^2 c^2 r_e Delta / (2 pi E^2)`, m^4.
pub fn chi(energy_ev: f64, distance: f64) -> f64 {
    let e = energy_ev * ELEMENTARY_CHARGE;
    let hc = PLANCK * SPEED_OF_LIGHT;
    hc * hc * ELECTRON_RADIUS * distance / (2.0 * PI * e * e)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualEnergyConfig {
    pub energy_a_ev: f64,
    pub energy_b_ev: f64,
    pub distance: f64,
    pub variant: Variant,
    /// Flat-field intensity dividing both images before the logarithm.
    pub incident_intensity: f64,
}

impl DualEnergyConfig {
    pub fn new(
        energy_a_ev: f64,
        energy_b_ev: f64,
        distance: f64,
        variant: Variant,
        incident_intensity: f64,
    ) -> Result<Self> {
        if !(energy_a_ev > 0.0) || !(energy_b_ev > 0.0) {
            return Err(Error::Config("energies must be positive".into()));
        }
        if energy_a_ev == energy_b_ev {
            return Err(Error::Config(format!(
                "the two energies must differ (both {energy_a_ev} eV)"
            )));
        }
        if !(distance >= 0.0) || !(incident_intensity > 0.0) {
            return Err(Error::Config(
                "distance must be >= 0 and incident intensity > 0".into(),
            ));
        }
        Ok(DualEnergyConfig {
            energy_a_ev,
            energy_b_ev,
            distance,
            variant,
            incident_intensity,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    /// Photoelectric line integral `P` in the `(E/1 keV)^-3` basis.
    pub photoelectric: Image2D,
    /// Projected electron density, electrons/m^2.
    pub electron_density: Image2D,
}

/// Alvarez-Macovski decomposition of two propagated images, solving
/// `[E^-3, sigma_KN(E) + chi(E) ksq] [F P; F rho] = -F ln I(E)` per frequency.
pub fn dual_energy_decompose(
    img_a: &Image2D,
    img_b: &Image2D,
    cfg: &DualEnergyConfig,
) -> Result<DecompositionResult> {
    if !img_a.same_shape(img_b)
        || (img_a.pixel_size() - img_b.pixel_size()).abs() > 1e-9 * img_a.pixel_size()
    {
        return Err(Error::Dimension(format!(
            "images are not congruent: {}x{} @ {} m vs {}x{} @ {} m",
            img_a.width(),
            img_a.height(),
            img_a.pixel_size(),
            img_b.width(),
            img_b.height(),
            img_b.pixel_size()
        )));
    }
    if !(cfg.incident_intensity > 0.0) {
        return Err(Error::Config("incident intensity must be positive".into()));
    }
    img_a.require_grid_size()?;
    let (w, h) = (img_a.width(), img_a.height());
    let sa = fft::rfft2(&log_signal(img_a, cfg, "A")?, w, h);
    let sb = fft::rfft2(&log_signal(img_b, cfg, "B")?, w, h);
    let grid = grid_for(img_a, cfg.variant)?;
    let system = AmSystem::new(cfg)?;
    let cols = sa.cols;
    let mut photo = fft::HalfSpectrum {
        width: w,
        height: h,
        cols,
        data: sa.data.clone(),
    };
    let mut rho = fft::HalfSpectrum {
        width: w,
        height: h,
        cols,
        data: sb.data.clone(),
    };
    for iy in 0..h {
        for ix in 0..cols {
            let i = iy * cols + ix;
            let (p, r) = system
                .solve(grid.ksq(ix, iy), sa.data[i], sb.data[i])
                .ok_or(Error::SingularSystem { ix, iy })?;
            photo.data[i] = p;
            rho.data[i] = r;
        }
    }
    Ok(DecompositionResult {
        photoelectric: img_a.with_samples(fft::irfft2(photo))?,
        electron_density: img_a.with_samples(fft::irfft2(rho))?,
    })
}

/// Row-wise 1-D analog of [`dual_energy_decompose`] on row-major buffers of
/// `width`-long periodic lines at pitch `pixel_size`. Returns `(P, rho)`.
/// Singular bins are reported as `(bin, row)`.
pub fn dual_energy_decompose_rows(
    samples_a: &[f64],
    samples_b: &[f64],
    width: usize,
    pixel_size: f64,
    cfg: &DualEnergyConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if width < 2 || samples_a.len() % width != 0 || samples_a.len() != samples_b.len() {
        return Err(Error::Dimension(format!(
            "row buffers of {} and {} samples do not match width {width}",
            samples_a.len(),
            samples_b.len()
        )));
    }
    if !(pixel_size > 0.0) {
        return Err(Error::Config(format!(
            "pixel size must be positive, got {pixel_size}"
        )));
    }
    let log = |samples: &[f64], label: &str| -> Result<Vec<f64>> {
        samples
            .iter()
            .enumerate()
            .map(|(i, &v)| log_value(v, cfg, label, i % width, i / width))
            .collect()
    };
    let sa = fft::rfft_rows(&log(samples_a, "A")?, width);
    let mut sb = fft::rfft_rows(&log(samples_b, "B")?, width);
    let system = AmSystem::new(cfg)?;
    let cols = width / 2 + 1;
    let ksq: Vec<f64> = axis_frequencies(width, pixel_size)[..cols]
        .iter()
        .map(|&k| axis_ksq(k, pixel_size, cfg.variant))
        .collect();
    let mut photo = sa.clone();
    for (i, (p, r)) in photo.iter_mut().zip(sb.iter_mut()).enumerate() {
        let (ix, iy) = (i % cols, i / cols);
        let (vp, vr) = system
            .solve(ksq[ix], *p, *r)
            .ok_or(Error::SingularSystem { ix, iy })?;
        *p = vp;
        *r = vr;
    }
    Ok((fft::irfft_rows(photo, width), fft::irfft_rows(sb, width)))
}

fn log_value(v: f64, cfg: &DualEnergyConfig, label: &str, x: usize, y: usize) -> Result<f64> {
    if v > 0.0 {
        Ok(-(v / cfg.incident_intensity).ln())
    } else {
        Err(Error::Domain(format!(
            "non-positive intensity {v} in image {label} at ({x}, {y})"
        )))
    }
}

fn log_signal(img: &Image2D, cfg: &DualEnergyConfig, label: &str) -> Result<Vec<f64>> {
    img.samples()
        .iter()
        .enumerate()
        .map(|(i, &v)| log_value(v, cfg, label, i % img.width(), i / img.width()))
        .collect()
}

/// Per-frequency 2x2 system of the decomposition.
struct AmSystem {
    pa: f64,
    pb: f64,
    sig_a: f64,
    sig_b: f64,
    chi_a: f64,
    chi_b: f64,
}

impl AmSystem {
    fn new(cfg: &DualEnergyConfig) -> Result<Self> {
        Ok(AmSystem {
            pa: photoelectric_basis(cfg.energy_a_ev),
            pb: photoelectric_basis(cfg.energy_b_ev),
            sig_a: klein_nishina(cfg.energy_a_ev)?,
            sig_b: klein_nishina(cfg.energy_b_ev)?,
            chi_a: chi(cfg.energy_a_ev, cfg.distance),
            chi_b: chi(cfg.energy_b_ev, cfg.distance),
        })
    }

    /// Cramer's rule; `None` when the determinant vanishes relative to the
    /// size of its terms.
    fn solve(&self, ksq: f64, a: Complex64, b: Complex64) -> Option<(Complex64, Complex64)> {
        let ba = self.sig_a + self.chi_a * ksq;
        let bb = self.sig_b + self.chi_b * ksq;
        let det = self.pa * bb - self.pb * ba;
        let scale = (self.pa * bb).abs() + (self.pb * ba).abs();
        if !(det.abs() > 1e-12 * scale) {
            return None;
        }
        Some(((a * bb - b * ba) / det, (b * self.pa - a * self.pb) / det))
    }
}
