//! Edge-based resolution measurement: azimuthal edge profiles, line spread
//! functions, Pearson VII fits, and region SNR.

use crate::error::{Error, PearsonParams, Result};
use crate::grid::Image2D;
use nalgebra::{Matrix4, Vector4};

#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    /// Bin centers, m.
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub counts: Vec<usize>,
}

impl RadialProfile {
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Bins whose centers lie in `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> RadialProfile {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.radii[i] >= lo && self.radii[i] <= hi)
            .collect();
        RadialProfile {
            radii: keep.iter().map(|&i| self.radii[i]).collect(),
            values: keep.iter().map(|&i| self.values[i]).collect(),
            counts: keep.iter().map(|&i| self.counts[i]).collect(),
        }
    }
}

/// Angle of pixel offset `(dx, dy)` in degrees: 0 points toward row 0 and
/// angles grow clockwise on screen.
fn screen_angle(dx: f64, dy: f64) -> f64 {
    dx.atan2(-dy).to_degrees().rem_euclid(360.0)
}

fn in_arc(angle: f64, start: f64, span: f64) -> bool {
    span >= 360.0 || (angle - start).rem_euclid(360.0) < span
}

/// Mean pixel value in radial bins `[r_min + i w, r_min + (i+1) w)` around
/// `center` (pixel units, `(x, y)`), restricted to the half-open arc
/// `[arc.0, arc.1)` in degrees.
pub fn radial_esf(
    img: &Image2D,
    center: (f64, f64),
    r_range: (f64, f64),
    arc: (f64, f64),
    bin_width: f64,
) -> Result<RadialProfile> {
    let (r_min, r_max) = r_range;
    if !(r_min >= 0.0 && r_max > r_min) {
        return Err(Error::Domain(format!(
            "radial range [{r_min}, {r_max}) is empty"
        )));
    }
    if !(bin_width > 0.0) {
        return Err(Error::Domain(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    let span = arc.1 - arc.0;
    if !(span > 0.0) || !arc.0.is_finite() {
        return Err(Error::Domain(format!(
            "arc [{}, {}) is empty",
            arc.0, arc.1
        )));
    }
    let w = img.pixel_size();
    let n_bins = ((r_max - r_min) / bin_width * (1.0 + 1e-12)).floor() as usize;
    if n_bins == 0 {
        return Err(Error::Domain(
            "radial range is narrower than one bin".into(),
        ));
    }
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    let reach = r_max / w + 1.0;
    let x0 = ((center.0 - reach).floor().max(0.0)) as usize;
    let y0 = ((center.1 - reach).floor().max(0.0)) as usize;
    let x1 = ((center.0 + reach).ceil().max(0.0) as usize).min(img.width().saturating_sub(1));
    let y1 = ((center.1 + reach).ceil().max(0.0) as usize).min(img.height().saturating_sub(1));
    if x0 <= x1 && y0 <= y1 {
        for iy in y0..=y1 {
            let row = img.row(iy);
            let dy = iy as f64 - center.1;
            for ix in x0..=x1 {
                let dx = ix as f64 - center.0;
                let r = dx.hypot(dy) * w;
                if r < r_min || r >= r_max {
                    continue;
                }
                if !in_arc(screen_angle(dx, dy), arc.0, span) {
                    continue;
                }
                let b = ((r - r_min) / bin_width) as usize;
                if b < n_bins {
                    sums[b] += row[ix];
                    counts[b] += 1;
                }
            }
        }
    }
    let mut out = RadialProfile {
        radii: Vec::new(),
        values: Vec::new(),
        counts: Vec::new(),
    };
    for b in 0..n_bins {
        if counts[b] > 0 {
            out.radii.push(r_min + (b as f64 + 0.5) * bin_width);
            out.values.push(sums[b] / counts[b] as f64);
            out.counts.push(counts[b]);
        }
    }
    if out.is_empty() {
        return Err(Error::Domain(
            "no pixels fall inside the requested radial range and arc".into(),
        ));
    }
    Ok(out)
}

/// Central differences on uniform bins, second-order one-sided at the ends.
pub fn differentiate(profile: &RadialProfile) -> Result<RadialProfile> {
    let n = profile.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "differentiation needs at least 3 bins, got {n}"
        )));
    }
    let r = &profile.radii;
    let h = (r[n - 1] - r[0]) / (n - 1) as f64;
    if !(h > 0.0) || r.windows(2).any(|p| ((p[1] - p[0]) - h).abs() > 1e-6 * h) {
        return Err(Error::Domain(
            "profile bins are not uniformly spaced".into(),
        ));
    }
    let y = &profile.values;
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
    d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h);
    for i in 1..n - 1 {
        d[i] = (y[i + 1] - y[i - 1]) / (2.0 * h);
    }
    Ok(RadialProfile {
        radii: r.clone(),
        values: d,
        counts: profile.counts.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearsonFit {
    pub amplitude: f64,
    /// m.
    pub center: f64,
    /// m.
    pub fwhm: f64,
    pub exponent: f64,
    /// RMS residual in profile units.
    pub residual_rms: f64,
    /// One-sigma parameter uncertainties; `None` when the normal matrix is singular.
    pub uncertainties: Option<PearsonParams>,
    pub iterations: usize,
}

/// `A [1 + 4 (x - x0)^2 (2^{1/m} - 1) / fwhm^2]^{-m}`
pub fn pearson_vii(x: f64, amplitude: f64, center: f64, fwhm: f64, exponent: f64) -> f64 {
    let d = (x - center) / fwhm;
    let base = 1.0 + 4.0 * d * d * (std::f64::consts::LN_2 / exponent).exp_m1();
    amplitude * (-exponent * base.ln()).exp()
}

impl PearsonFit {
    pub fn evaluate(&self, x: f64) -> f64 {
        pearson_vii(x, self.amplitude, self.center, self.fwhm, self.exponent)
    }

    pub fn params(&self) -> PearsonParams {
        PearsonParams {
            amplitude: self.amplitude,
            center: self.center,
            fwhm: self.fwhm,
            exponent: self.exponent,
        }
    }
}

const M_MIN: f64 = 0.5;
const M_SPAN: f64 = 49.5;
const U_LIMIT: f64 = 40.0;
const MAX_ITERATIONS: usize = 200;
const MIN_BINS: usize = 8;

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn exponent_of(u: f64) -> f64 {
    M_MIN + M_SPAN * sigmoid(u)
}

/// Internal parameters `(A, x0, ln fwhm, u)` on normalised data.
fn model(p: &Vector4<f64>, x: f64) -> f64 {
    pearson_vii(x, p[0], p[1], p[2].exp(), exponent_of(p[3]))
}

fn residuals(p: &Vector4<f64>, xs: &[f64], ys: &[f64]) -> Vec<f64> {
    xs.iter().zip(ys).map(|(&x, &y)| model(p, x) - y).collect()
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian(p: &Vector4<f64>, xs: &[f64]) -> Vec<[f64; 4]> {
    let mut out = vec![[0.0; 4]; xs.len()];
    for k in 0..4 {
        let h = 1e-6 * p[k].abs().max(1.0);
        let mut hi = *p;
        let mut lo = *p;
        hi[k] += h;
        lo[k] -= h;
        for (row, &x) in out.iter_mut().zip(xs) {
            row[k] = (model(&hi, x) - model(&lo, x)) / (2.0 * h);
        }
    }
    out
}

fn normal_equations(j: &[[f64; 4]], r: &[f64]) -> (Matrix4<f64>, Vector4<f64>) {
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for (row, &ri) in j.iter().zip(r) {
        for a in 0..4 {
            jtr[a] += row[a] * ri;
            for b in 0..4 {
                jtj[(a, b)] += row[a] * row[b];
            }
        }
    }
    (jtj, jtr)
}

/// Width at half extremum of normalised data peaking at `peak` with value 1.
fn half_max_width(xs: &[f64], ys: &[f64], peak: usize) -> Option<f64> {
    let cross = |i: usize, j: usize| xs[i] + (0.5 - ys[i]) * (xs[j] - xs[i]) / (ys[j] - ys[i]);
    let left = (1..=peak)
        .rev()
        .find(|&i| ys[i - 1] < 0.5)
        .map(|i| cross(i - 1, i));
    let right = (peak..xs.len() - 1)
        .find(|&i| ys[i + 1] < 0.5)
        .map(|i| cross(i, i + 1));
    match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        (Some(l), None) => Some(2.0 * (xs[peak] - l)),
        (None, Some(r)) => Some(2.0 * (r - xs[peak])),
        (None, None) => None,
    }
    .filter(|w| *w > 0.0)
}

/// Damped least-squares Pearson VII fit with uniform weights.
///
/// The profile is normalised by its extremum value and location and by the
/// bin spacing before fitting, so the estimate is equivariant under scaling
/// of the values and shifts of the abscissa.
pub fn fit_pearson_vii(profile: &RadialProfile) -> Result<PearsonFit> {
    let n = profile.len();
    if n < MIN_BINS {
        return Err(Error::InsufficientData(format!(
            "Pearson VII fit needs at least {MIN_BINS} bins, got {n}"
        )));
    }
    if profile
        .values
        .iter()
        .chain(&profile.radii)
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidInput("non-finite profile sample".into()));
    }
    let peak = (0..n)
        .max_by(|&a, &b| profile.values[a].abs().total_cmp(&profile.values[b].abs()))
        .unwrap();
    let y_scale = profile.values[peak];
    if y_scale == 0.0 {
        return Err(Error::InsufficientData(
            "profile is identically zero".into(),
        ));
    }
    let x_origin = profile.radii[peak];
    let x_scale = (profile.radii[n - 1] - profile.radii[0]) / (n - 1) as f64;
    if !(x_scale > 0.0) {
        return Err(Error::Domain("profile radii must increase".into()));
    }
    let xs: Vec<f64> = profile
        .radii
        .iter()
        .map(|r| (r - x_origin) / x_scale)
        .collect();
    let ys: Vec<f64> = profile.values.iter().map(|v| v / y_scale).collect();

    let width0 = half_max_width(&xs, &ys, peak).unwrap_or(n as f64 / 2.0);
    let u0 = {
        let s = (2.0 - M_MIN) / M_SPAN;
        (s / (1.0 - s)).ln()
    };
    let mut p = Vector4::new(1.0, 0.0, width0.ln(), u0);
    let mut r = residuals(&p, &xs, &ys);
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let j = jacobian(&p, &xs);
        let (jtj, jtr) = normal_equations(&j, &r);
        let diag_floor = 1e-12 * (0..4).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for i in 0..4 {
                a[(i, i)] += lambda * (jtj[(i, i)] + diag_floor);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p + step;
            trial[3] = trial[3].clamp(-U_LIMIT, U_LIMIT);
            let tr = residuals(&trial, &xs, &ys);
            let tc = cost(&tr);
            if tc.is_finite() && tc <= c {
                let actual = trial - p;
                p = trial;
                r = tr;
                c = tc;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if actual.norm() <= 1e-8 * (p.norm() + 1e-8) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left at any damping: a stationary point.
            converged = true;
        }
        if converged {
            break;
        }
    }

    let amplitude = p[0] * y_scale;
    let center = x_origin + p[1] * x_scale;
    let fwhm = p[2].exp() * x_scale;
    let exponent = exponent_of(p[3]);
    let residual_rms = (c / n as f64).sqrt() * y_scale.abs();
    if !converged {
        return Err(Error::FitFailure {
            best: PearsonParams {
                amplitude,
                center,
                fwhm,
                exponent,
            },
            residual_rms,
            iterations,
        });
    }

    let j = jacobian(&p, &xs);
    let (jtj, _) = normal_equations(&j, &r);
    let dof = (n - 4) as f64;
    let uncertainties = jtj.try_inverse().map(|cov| {
        let cov = cov * (c / dof);
        let s = sigmoid(p[3]);
        PearsonParams {
            amplitude: cov[(0, 0)].max(0.0).sqrt() * y_scale.abs(),
            center: cov[(1, 1)].max(0.0).sqrt() * x_scale,
            fwhm: cov[(2, 2)].max(0.0).sqrt() * fwhm,
            exponent: cov[(3, 3)].max(0.0).sqrt() * M_SPAN * s * (1.0 - s),
        }
    });
    Ok(PearsonFit {
        amplitude,
        center,
        fwhm,
        exponent,
        residual_rms,
        uncertainties,
        iterations,
    })
}

/// Fractional FWHM improvement `(pm - gpm) / pm`; negative when GPM is wider.
pub fn fwhm_improvement(gamma_pm: f64, gamma_gpm: f64) -> Result<f64> {
    if !(gamma_pm > 0.0) {
        return Err(Error::InvalidInput(format!(
            "PM FWHM must be positive, got {gamma_pm}"
        )));
    }
    Ok((gamma_pm - gamma_gpm) / gamma_pm)
}

/// In-region mean over in-region sample standard deviation.
pub fn snr(img: &Image2D, region: &[bool]) -> Result<f64> {
    if region.len() != img.len() {
        return Err(Error::Dimension(format!(
            "mask has {} entries for a {}x{} image",
            region.len(),
            img.width(),
            img.height()
        )));
    }
    let vals: Vec<f64> = img
        .samples()
        .iter()
        .zip(region)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    if vals.len() < 16 {
        return Err(Error::InsufficientData(format!(
            "SNR region needs at least 16 pixels, got {}",
            vals.len()
        )));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Err(Error::UndefinedSnr);
    }
    Ok(mean / var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(xs: &[f64], f: impl Fn(f64) -> f64) -> RadialProfile {
        RadialProfile {
            radii: xs.to_vec(),
            values: xs.iter().map(|&x| f(x)).collect(),
            counts: vec![1; xs.len()],
        }
    }

    fn bins(n: usize, h: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * h).collect()
    }

    #[test]
    fn half_width_points_are_half_amplitude() {
        for m in [0.5, 1.0, 3.7, 50.0] {
            let v = pearson_vii(2.0 + 0.75, -4.0, 2.0, 1.5, m);
            assert!((v + 2.0).abs() < 1e-14, "m={m}: {v}");
        }
    }

    #[test]
    fn radially_constant_image_gives_constant_profile() {
        let img = Image2D::filled(40, 40, 1e-5, 3.25).unwrap();
        let p = radial_esf(&img, (19.5, 19.5), (0.0, 15e-5), (0.0, 360.0), 1e-5).unwrap();
        assert!(p.values.iter().all(|&v| v == 3.25));
        assert_eq!(p.len(), 15);
    }

    #[test]
    fn half_arcs_merge_into_full_circle() {
        let img = Image2D::from_fn(33, 29, 1.0, |x, y| (x * 7 + y * 3) as f64 % 5.0).unwrap();
        let c = (15.3, 13.8);
        let full = radial_esf(&img, c, (0.0, 12.0), (0.0, 360.0), 1.0).unwrap();
        let a = radial_esf(&img, c, (0.0, 12.0), (0.0, 180.0), 1.0).unwrap();
        let b = radial_esf(&img, c, (0.0, 12.0), (180.0, 360.0), 1.0).unwrap();
        for (i, r) in full.radii.iter().enumerate() {
            let pick = |p: &RadialProfile| {
                p.radii
                    .iter()
                    .position(|x| x == r)
                    .map(|k| (p.values[k] * p.counts[k] as f64, p.counts[k]))
                    .unwrap_or((0.0, 0))
            };
            let (sa, na) = pick(&a);
            let (sb, nb) = pick(&b);
            assert_eq!(na + nb, full.counts[i]);
            assert!(((sa + sb) / (na + nb) as f64 - full.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn arc_wraps_through_zero() {
        let img = Image2D::from_fn(21, 21, 1.0, |x, _| x as f64).unwrap();
        // Straight up from the center is angle 0, straight right is 90.
        let up = radial_esf(&img, (10.0, 10.0), (4.0, 6.0), (350.0, 370.0), 1.0).unwrap();
        assert!(up.values.iter().all(|v| (v - 10.0).abs() < 1.0));
        let right = radial_esf(&img, (10.0, 10.0), (4.0, 6.0), (80.0, 100.0), 1.0).unwrap();
        assert!(right.values.iter().all(|&v| v > 13.0));
    }

    #[test]
    fn empty_arc_is_a_domain_error() {
        let img = Image2D::filled(8, 8, 1.0, 1.0).unwrap();
        assert!(matches!(
            radial_esf(&img, (4.0, 4.0), (0.0, 3.0), (90.0, 90.0), 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            radial_esf(&img, (100.0, 100.0), (0.0, 3.0), (0.0, 360.0), 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn differentiation_examples() {
        let xs = bins(10, 0.5);
        let lin = differentiate(&profile(&xs, |x| 3.0 * x - 1.0)).unwrap();
        assert!(lin.values.iter().all(|v| (v - 3.0).abs() < 1e-12));
        let flat = differentiate(&profile(&xs, |_| 2.0)).unwrap();
        assert!(flat.values.iter().all(|&v| v == 0.0));
        let quad = differentiate(&profile(&xs, |x| x * x)).unwrap();
        for (d, x) in quad.values.iter().zip(&xs) {
            assert!((d - 2.0 * x).abs() < 1e-12);
        }
        let mut gappy = profile(&xs, |x| x);
        gappy.radii[4] += 0.1;
        assert!(matches!(differentiate(&gappy), Err(Error::Domain(_))));
    }

    #[test]
    fn lorentzian_fit_recovers_width() {
        let xs = bins(41, 1.0);
        let p = profile(&xs, |x| 2.0 / (1.0 + 4.0 * ((x - 20.3) / 3.0).powi(2)));
        let fit = fit_pearson_vii(&p).unwrap();
        assert!((fit.fwhm - 3.0).abs() < 3e-3, "{fit:?}");
        assert!((fit.exponent - 1.0).abs() < 0.02, "{fit:?}");
        assert!((fit.center - 20.3).abs() < 1e-6);
    }

    #[test]
    fn gaussian_fit_reports_large_exponent() {
        let xs = bins(41, 1.0);
        let sigma = 4.0 / (8.0 * 2f64.ln()).sqrt();
        let p = profile(&xs, |x| {
            -(-(x - 19.6).powi(2) / (2.0 * sigma * sigma)).exp()
        });
        let fit = fit_pearson_vii(&p).unwrap();
        assert!(fit.exponent > 10.0, "{fit:?}");
        assert!((fit.fwhm - 4.0).abs() < 0.04, "{fit:?}");
        assert!(fit.amplitude < 0.0);
    }

    #[test]
    fn too_few_bins_rejected() {
        let p = profile(&bins(7, 1.0), |x| 1.0 / (1.0 + x * x));
        assert!(matches!(
            fit_pearson_vii(&p),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn improvement_arithmetic() {
        assert_eq!(fwhm_improvement(2.0, 2.0).unwrap(), 0.0);
        assert_eq!(fwhm_improvement(2.0, 1.0).unwrap(), 0.5);
        assert!(fwhm_improvement(2.0, 3.0).unwrap() < 0.0);
        assert!(fwhm_improvement(0.0, 1.0).is_err());
    }

    #[test]
    fn snr_examples() {
        let flat = Image2D::filled(5, 5, 1.0, 4.0).unwrap();
        assert_eq!(snr(&flat, &[true; 25]), Err(Error::UndefinedSnr));
        // 16 values of 10 +/- a with sample stddev 2.
        let a = 2.0 * (15.0f64 / 16.0).sqrt();
        let img = Image2D::from_fn(4, 4, 1.0, |x, y| {
            if (x + y) % 2 == 0 {
                10.0 + a
            } else {
                10.0 - a
            }
        })
        .unwrap();
        assert!((snr(&img, &[true; 16]).unwrap() - 5.0).abs() < 1e-12);
        assert!(snr(&img, &[true; 15]).is_err());
    }
}
