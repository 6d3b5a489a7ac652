//! Phantom rendering, the projection approximation, linearised TIE forward
//! propagation, detector blur and counting noise.
//!
//! All Fourier-domain operations assume periodic boundaries; phantoms need a
//! margin so that wraparound stays negligible.

use crate::error::{Error, Result};
use crate::fft;
use crate::filters::gaussian_otf_value;
use crate::grid::{grid_for, Image2D, Variant};
use crate::retrieval::Material;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use std::f64::consts::PI;

/// End-on cylinder: a disk of uniform projected thickness.
#[derive(Debug, Clone, PartialEq)]
pub struct Disk {
    /// Center in pixel coordinates; pixel `(i, j)` is centered on `(i, j)`.
    pub center: (f64, f64),
    /// Radius in pixels.
    pub radius: f64,
    /// Projected thickness, m.
    pub thickness: f64,
    /// Optional material tag for per-material maps.
    pub material: Option<String>,
}

/// How overlapping shapes combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Overlap {
    /// Later shapes replace earlier ones.
    #[default]
    Override,
    /// Thicknesses add up.
    Add,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub pixel_size: f64,
    /// Sub-samples per pixel along each axis for area-weighted antialiasing.
    pub supersample: usize,
    pub overlap: Overlap,
    pub shapes: Vec<Disk>,
}

impl PhantomSpec {
    /// Copy restricted to shapes tagged with `material`.
    pub fn only_material(&self, material: &str) -> PhantomSpec {
        PhantomSpec {
            shapes: self
                .shapes
                .iter()
                .filter(|d| d.material.as_deref() == Some(material))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || !(self.pixel_size > 0.0) {
            return Err(Error::InvalidInput("phantom grid is empty".into()));
        }
        if self.supersample == 0 {
            return Err(Error::InvalidInput("supersample must be >= 1".into()));
        }
        for (i, d) in self.shapes.iter().enumerate() {
            if !(d.radius > 0.0) || !(d.thickness >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "shape {i}: radius must be > 0 and thickness >= 0"
                )));
            }
            let (cx, cy) = d.center;
            if cx - d.radius < -0.5
                || cy - d.radius < -0.5
                || cx + d.radius > self.width as f64 - 0.5
                || cy + d.radius > self.height as f64 - 0.5
            {
                return Err(Error::Geometry(format!(
                    "shape {i} (center ({cx}, {cy}), radius {}) leaves the {}x{} grid",
                    d.radius, self.width, self.height
                )));
            }
        }
        Ok(())
    }
}

/// Renders the thickness map. Pixels crossed by a boundary are averaged over
/// `supersample^2` sub-samples; pixels wholly inside get the exact value.
pub fn disk_thickness(spec: &PhantomSpec) -> Result<Image2D> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let s = spec.supersample;
    let offsets: Vec<f64> = (0..s).map(|a| (a as f64 + 0.5) / s as f64 - 0.5).collect();
    let mut out = vec![0.0; w * h];
    let mut sub = vec![0.0; s * s];
    // Half-diagonal of a pixel: farther than this from the rim means no crossing.
    const MARGIN: f64 = std::f64::consts::FRAC_1_SQRT_2 + 1e-9;
    for (y, row) in out.chunks_mut(w).enumerate() {
        for (x, px) in row.iter_mut().enumerate() {
            let (fx, fy) = (x as f64, y as f64);
            let mut crossed = false;
            let mut value = 0.0;
            for d in &spec.shapes {
                let dist = ((fx - d.center.0).powi(2) + (fy - d.center.1).powi(2)).sqrt();
                if dist > d.radius + MARGIN {
                    continue;
                }
                if dist < d.radius - MARGIN {
                    value = match spec.overlap {
                        Overlap::Override => d.thickness,
                        Overlap::Add => value + d.thickness,
                    };
                } else {
                    crossed = true;
                    break;
                }
            }
            if !crossed {
                *px = value;
                continue;
            }
            sub.iter_mut().for_each(|v| *v = 0.0);
            for d in &spec.shapes {
                let r2 = d.radius * d.radius;
                for (j, oy) in offsets.iter().enumerate() {
                    let dy = fy + oy - d.center.1;
                    for (i, ox) in offsets.iter().enumerate() {
                        let dx = fx + ox - d.center.0;
                        if dx * dx + dy * dy < r2 {
                            let v = &mut sub[j * s + i];
                            *v = match spec.overlap {
                                Overlap::Override => d.thickness,
                                Overlap::Add => *v + d.thickness,
                            };
                        }
                    }
                }
            }
            *px = sub.iter().sum::<f64>() / (s * s) as f64;
        }
    }
    Image2D::new(w, h, spec.pixel_size, out)
}

/// Transmitted intensity `I_0 exp(-mu T)` and phase `-(2 pi / lambda) delta T`.
pub fn projection_approximation(
    thickness: &Image2D,
    mat: &Material,
    incident_intensity: f64,
) -> Result<(Image2D, Image2D)> {
    if let Some(v) = thickness.samples().iter().find(|&&v| v < 0.0) {
        return Err(Error::Domain(format!("negative thickness {v}")));
    }
    let k = 2.0 * PI / mat.wavelength();
    let intensity = thickness.map(|t| incident_intensity * (-mat.mu * t).exp())?;
    let phase = thickness.map(|t| -k * mat.delta * t)?;
    Ok((intensity, phase))
}

fn check_coefficient(coefficient: f64) -> Result<()> {
    if !(coefficient >= 0.0) || !coefficient.is_finite() {
        return Err(Error::Config(format!(
            "propagation coefficient must be non-negative, got {coefficient}"
        )));
    }
    Ok(())
}

/// Linearised homogeneous-object TIE as a Fourier multiplier
/// `(1 + coefficient * ksq)` of the chosen variant.
pub fn tie_propagate(contact: &Image2D, coefficient: f64, variant: Variant) -> Result<Image2D> {
    check_coefficient(coefficient)?;
    if coefficient == 0.0 {
        return Ok(contact.clone());
    }
    contact.require_grid_size()?;
    let grid = grid_for(contact, variant)?;
    let out = fft::filter_real(
        contact.samples(),
        contact.width(),
        contact.height(),
        |ix, iy| 1.0 + coefficient * grid.ksq(ix, iy),
    );
    contact.with_samples(out)
}

/// `F^-1[(1 + coefficient * (k_x^2 + k_y^2)) F I]`.
pub fn tie_propagate_continuous(contact: &Image2D, coefficient: f64) -> Result<Image2D> {
    tie_propagate(contact, coefficient, Variant::Continuous)
}

/// `I - coefficient * lap5(I)` with the periodic five-point Laplacian at the
/// image pitch, evaluated in real space.
pub fn tie_propagate_discrete(contact: &Image2D, coefficient: f64) -> Result<Image2D> {
    check_coefficient(coefficient)?;
    if coefficient == 0.0 {
        return Ok(contact.clone());
    }
    let (w, h) = (contact.width(), contact.height());
    let s = contact.samples();
    let scale = coefficient / (contact.pixel_size() * contact.pixel_size());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let up = (y + h - 1) % h;
        let down = (y + 1) % h;
        for x in 0..w {
            let left = (x + w - 1) % w;
            let right = (x + 1) % w;
            let c = s[y * w + x];
            let lap =
                s[y * w + left] + s[y * w + right] + s[up * w + x] + s[down * w + x] - 4.0 * c;
            out.push(c - scale * lap);
        }
    }
    contact.with_samples(out)
}

/// Convolution with a Gaussian PSF of the given FWHM in pixels.
pub fn gaussian_blur(img: &Image2D, fwhm_px: f64) -> Result<Image2D> {
    if !(fwhm_px >= 0.0) || !fwhm_px.is_finite() {
        return Err(Error::InvalidInput(format!(
            "blur FWHM must be non-negative, got {fwhm_px}"
        )));
    }
    if fwhm_px == 0.0 {
        return Ok(img.clone());
    }
    img.require_grid_size()?;
    let grid = grid_for(img, Variant::Continuous)?;
    let fwhm = fwhm_px * img.pixel_size();
    let out = fft::filter_real(img.samples(), img.width(), img.height(), |ix, iy| {
        gaussian_otf_value(grid.k_squared(ix, iy), fwhm)
    });
    img.with_samples(out)
}

/// Replaces each pixel `v` with `Poisson(v * counts_per_unit) / counts_per_unit`.
pub fn add_poisson_noise(img: &Image2D, counts_per_unit: f64, seed: u64) -> Result<Image2D> {
    if !(counts_per_unit > 0.0) || !counts_per_unit.is_finite() {
        return Err(Error::InvalidInput(format!(
            "counts per unit must be positive, got {counts_per_unit}"
        )));
    }
    if let Some(v) = img.samples().iter().find(|&&v| v < 0.0) {
        return Err(Error::Domain(format!("negative intensity {v}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(img.len());
    for &v in img.samples() {
        let lambda = v * counts_per_unit;
        let n = if lambda > 0.0 {
            Poisson::new(lambda)
                .map_err(|e| Error::Domain(format!("Poisson rate {lambda}: {e}")))?
                .sample(&mut rng)
        } else {
            0.0
        };
        out.push(n / counts_per_unit);
    }
    img.with_samples(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_spec(n: usize, radius: f64, s: usize) -> PhantomSpec {
        PhantomSpec {
            width: n,
            height: n,
            pixel_size: 25e-6,
            supersample: s,
            overlap: Overlap::Override,
            shapes: vec![Disk {
                center: (n as f64 / 2.0, n as f64 / 2.0),
                radius,
                thickness: 6e-3,
                material: None,
            }],
        }
    }

    #[test]
    fn interior_and_exterior_values_are_exact() {
        let t = disk_thickness(&disk_spec(64, 20.5, 5)).unwrap();
        assert_eq!(t.get(32, 32), 6e-3);
        assert_eq!(t.get(32, 20), 6e-3);
        assert_eq!(t.get(0, 0), 0.0);
        assert_eq!(t.get(32, 55), 0.0);
    }

    #[test]
    fn half_covered_pixel_matches_dense_area_fraction() {
        // Huge disk whose rim passes through the center of pixel (40, 32).
        let radius = 1.0e5;
        let center = (40.0 - radius, 32.0);
        for s in [4, 8] {
            let spec = PhantomSpec {
                width: 64,
                height: 64,
                pixel_size: 1e-6,
                supersample: s,
                overlap: Overlap::Override,
                shapes: vec![Disk {
                    center,
                    radius,
                    thickness: 1.0,
                    material: None,
                }],
            };
            // The disk is far larger than the grid, so coverage is checked
            // with the unchecked reference renderer.
            let dense = 2000;
            let mut inside = 0usize;
            for j in 0..dense {
                for i in 0..dense {
                    let x = 40.0 - 0.5 + (i as f64 + 0.5) / dense as f64;
                    let y = 32.0 - 0.5 + (j as f64 + 0.5) / dense as f64;
                    if (x - center.0).powi(2) + (y - center.1).powi(2) < radius * radius {
                        inside += 1;
                    }
                }
            }
            let oracle = inside as f64 / (dense * dense) as f64;
            let rendered = render_pixel_unchecked(&spec, 40, 32);
            let tol = 1.0 / (2.0 * (s * s) as f64);
            assert!((oracle - 0.5).abs() < 1e-3);
            assert!((rendered - 0.5).abs() <= tol, "s={s}: {rendered}");
            assert!((rendered - oracle).abs() <= tol + 1e-3);
        }
    }

    /// Sub-sampled coverage of one pixel without the grid-bounds check.
    fn render_pixel_unchecked(spec: &PhantomSpec, x: usize, y: usize) -> f64 {
        let s = spec.supersample;
        let mut acc = 0.0;
        for j in 0..s {
            for i in 0..s {
                let px = x as f64 + (i as f64 + 0.5) / s as f64 - 0.5;
                let py = y as f64 + (j as f64 + 0.5) / s as f64 - 0.5;
                for d in &spec.shapes {
                    if (px - d.center.0).powi(2) + (py - d.center.1).powi(2) < d.radius * d.radius {
                        acc += d.thickness;
                    }
                }
            }
        }
        acc / (s * s) as f64
    }

    #[test]
    fn renderer_agrees_with_reference_on_boundary_pixels() {
        let spec = disk_spec(48, 13.3, 4);
        let t = disk_thickness(&spec).unwrap();
        for y in 0..48 {
            for x in 0..48 {
                let r = render_pixel_unchecked(&spec, x, y);
                assert!((t.get(x, y) - r).abs() < 1e-15, "({x},{y})");
            }
        }
    }

    #[test]
    fn out_of_bounds_shape_is_a_geometry_error() {
        let mut spec = disk_spec(32, 10.0, 2);
        spec.shapes[0].center = (5.0, 16.0);
        assert!(matches!(disk_thickness(&spec), Err(Error::Geometry(_))));
    }

    #[test]
    fn additive_overlap_sums_thickness() {
        let mut spec = disk_spec(32, 10.0, 2);
        spec.overlap = Overlap::Add;
        spec.shapes.push(Disk {
            center: (16.0, 16.0),
            radius: 4.0,
            thickness: 1e-3,
            material: Some("rod".into()),
        });
        let t = disk_thickness(&spec).unwrap();
        assert!((t.get(16, 16) - 7e-3).abs() < 1e-15);
        let rod = disk_thickness(&spec.only_material("rod")).unwrap();
        assert_eq!(rod.get(16, 16), 1e-3);
        assert_eq!(rod.get(16, 24), 0.0);
    }

    #[test]
    fn projection_approximation_limits() {
        let mat = Material::from_attenuation(4e-7, 57.0, 24e3).unwrap();
        let zero = Image2D::filled(4, 4, 1e-5, 0.0).unwrap();
        let (i, p) = projection_approximation(&zero, &mat, 2.0).unwrap();
        assert!(i.samples().iter().all(|&v| v == 2.0));
        assert!(p.samples().iter().all(|&v| v == 0.0));
        let hvl = Image2D::filled(4, 4, 1e-5, std::f64::consts::LN_2 / mat.mu).unwrap();
        let (i, _) = projection_approximation(&hvl, &mat, 2.0).unwrap();
        assert!(i.samples().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let neg = Image2D::filled(4, 4, 1e-5, -1e-3).unwrap();
        assert!(matches!(
            projection_approximation(&neg, &mat, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn propagation_trivial_cases() {
        let flat = Image2D::filled(16, 16, 1e-5, 0.8).unwrap();
        let c = tie_propagate_continuous(&flat, 1e-9).unwrap();
        let d = tie_propagate_discrete(&flat, 1e-9).unwrap();
        assert!(c.samples().iter().all(|v| (v - 0.8).abs() < 1e-14));
        assert!(d.samples().iter().all(|v| (v - 0.8).abs() < 1e-14));
        let img = Image2D::from_fn(8, 8, 1e-5, |x, y| (x + 2 * y) as f64).unwrap();
        assert_eq!(tie_propagate_continuous(&img, 0.0).unwrap(), img);
        assert_eq!(tie_propagate_discrete(&img, 0.0).unwrap(), img);
        assert!(tie_propagate_discrete(&img, -1.0).is_err());
    }

    #[test]
    fn blur_trivial_cases() {
        let img = Image2D::from_fn(8, 8, 1e-5, |x, y| (x * y) as f64).unwrap();
        assert_eq!(gaussian_blur(&img, 0.0).unwrap(), img);
        let b = gaussian_blur(&img, 2.0).unwrap();
        assert!((b.mean() - img.mean()).abs() < 1e-12 * img.mean());
        assert!(gaussian_blur(&img, -1.0).is_err());
    }

    #[test]
    fn noise_is_deterministic_and_rejects_negative_input() {
        let img = Image2D::filled(8, 8, 1e-5, 1.0).unwrap();
        let a = add_poisson_noise(&img, 100.0, 7).unwrap();
        let b = add_poisson_noise(&img, 100.0, 7).unwrap();
        assert_eq!(a, b);
        let c = add_poisson_noise(&img, 100.0, 8).unwrap();
        assert_ne!(a, c);
        let neg = Image2D::filled(4, 4, 1e-5, -0.1).unwrap();
        assert!(matches!(
            add_poisson_noise(&neg, 10.0, 0),
            Err(Error::Domain(_))
        ));
        assert!(add_poisson_noise(&img, 0.0, 0).is_err());
    }
}
