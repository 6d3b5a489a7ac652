//! Experiment drivers composed from the library stages.

use anyhow::{anyhow, Context, Result};
use phaseret::ct::{
    analytic_sinogram, attenuation_sinogram, blur_sinogram, decompose_sinograms, fbp,
    rebin_sinogram, retrieve_sinogram, sinogram_to_intensity, uniform_angles, Circle,
    CirclePhantom2D, DetectorSampling, Sinogram,
};
use phaseret::filters::{
    curve_extract, filter_ratio, fractional_difference, retrieval_transfer, CurvePath,
    FilterParams, TransferMap,
};
use phaseret::grid::{block_downsample, frequency_grid, Image2D, Variant};
use phaseret::metrology::{
    differentiate, fit_pearson_vii, fwhm_improvement, radial_esf, PearsonFit, RadialProfile,
};
use phaseret::retrieval::{
    delta_from_electron_density, klein_nishina, photoelectric_basis, retrieve,
    retrieve_two_material, two_material_coefficient, DualEnergyConfig, Material, RetrievalConfig,
};
use phaseret::simulate::{
    disk_thickness, gaussian_blur, tie_propagate, Disk, Overlap, PhantomSpec,
};
use std::collections::BTreeMap;

/// Where and how an edge LSF is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeWindow {
    /// Center in pixel coordinates `(x, y)`.
    pub center: (f64, f64),
    /// Edge radius, pixels.
    pub radius_px: f64,
    /// Profile extends this far either side of the edge, pixels.
    pub half_width_px: f64,
    pub bin_width_px: f64,
    /// Degrees, clockwise from the direction of row 0.
    pub arc_deg: (f64, f64),
}

/// Azimuthal ESF around the edge and its derivative.
pub fn edge_profiles(
    img: &Image2D,
    window: &EdgeWindow,
) -> phaseret::Result<(RadialProfile, RadialProfile)> {
    let w = img.pixel_size();
    let lo = (window.radius_px - window.half_width_px).max(0.0) * w;
    let hi = (window.radius_px + window.half_width_px) * w;
    let esf = radial_esf(
        img,
        window.center,
        (lo, hi),
        window.arc_deg,
        window.bin_width_px * w,
    )?;
    let lsf = differentiate(&esf)?;
    Ok((esf, lsf))
}

/// Pearson VII fit to the edge LSF.
pub fn edge_lsf(img: &Image2D, window: &EdgeWindow) -> phaseret::Result<PearsonFit> {
    fit_pearson_vii(&edge_profiles(img, window)?.1)
}

/// Projected thickness `-ln(I / I_0) / mu`.
pub fn thickness_from_intensity(img: &Image2D, mu: f64, i0: f64) -> Result<Image2D> {
    if let Some(v) = img.samples().iter().find(|&&v| !(v > 0.0)) {
        return Err(anyhow!("retrieved intensity {v} is not positive"));
    }
    Ok(img.map(|v| -(v / i0).ln() / mu)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionSweepParams {
    /// Detector grid edge length, pixels.
    pub grid: usize,
    /// Simulation grid refinement per detector pixel.
    pub supersample: usize,
    /// Detector pitch, m.
    pub pixel_size: f64,
    /// Cylinder radius, detector pixels.
    pub radius_px: f64,
    /// Projected thickness, m.
    pub thickness: f64,
    /// Propagation distance, m.
    pub distance: f64,
    pub material: Material,
    /// Gaussian applied to the thickness map before propagation, in pixels of
    /// the refined simulation grid.
    pub pre_blur_sim_px: f64,
    /// Detector PSF FWHM values, detector pixels.
    pub psf_px: Vec<f64>,
    pub half_width_px: f64,
    pub bin_width_px: f64,
    pub arc_deg: (f64, f64),
}

impl ResolutionSweepParams {
    /// 2048^2 grid, x5 refinement, 25 um pixels, 900.5 px water cylinder of
    /// 6 mm thickness, 4 mm propagation.
    pub fn full(material: Material) -> Self {
        ResolutionSweepParams {
            grid: 2048,
            supersample: 5,
            pixel_size: 25e-6,
            radius_px: 900.5,
            thickness: 6e-3,
            distance: 4e-3,
            material,
            pre_blur_sim_px: 1.0,
            psf_px: vec![1.0, 2.0, 3.0],
            half_width_px: 12.0,
            bin_width_px: 0.25,
            arc_deg: (0.0, 360.0),
        }
    }

    /// 512^2 grid with x4 refinement and the radius scaled with the grid.
    pub fn fast(material: Material) -> Self {
        ResolutionSweepParams {
            grid: 512,
            supersample: 4,
            radius_px: 225.5,
            ..Self::full(material)
        }
    }

    pub fn center(&self) -> (f64, f64) {
        let c = (self.grid as f64 - 1.0) / 2.0;
        (c, c)
    }

    pub fn window(&self) -> EdgeWindow {
        EdgeWindow {
            center: self.center(),
            radius_px: self.radius_px,
            half_width_px: self.half_width_px,
            bin_width_px: self.bin_width_px,
            arc_deg: self.arc_deg,
        }
    }

    pub fn coefficient(&self) -> f64 {
        self.material.delta * self.distance / self.material.mu
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Applied detector PSF FWHM (pixels) or rebin factor.
    pub setting: f64,
    /// Measured FWHM of the unretrieved image edge, m.
    pub measured_fwhm: Option<f64>,
    pub pm: Option<PearsonFit>,
    pub gpm: Option<PearsonFit>,
    pub improvement: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn from_fits(
        setting: f64,
        measured_fwhm: Option<f64>,
        pm: phaseret::Result<PearsonFit>,
        gpm: phaseret::Result<PearsonFit>,
    ) -> SweepRow {
        let mut errors = Vec::new();
        let pm = pm.map_err(|e| errors.push(format!("PM: {e}"))).ok();
        let gpm = gpm.map_err(|e| errors.push(format!("GPM: {e}"))).ok();
        let improvement = match (&pm, &gpm) {
            (Some(a), Some(b)) => fwhm_improvement(a.fwhm, b.fwhm)
                .map_err(|e| errors.push(e.to_string()))
                .ok(),
            _ => None,
        };
        SweepRow {
            setting,
            measured_fwhm,
            pm,
            gpm,
            improvement,
            error: (!errors.is_empty()).then(|| errors.join("; ")),
        }
    }
}

/// Phase-contrast image of the cylinder at detector resolution, before the
/// detector PSF: render on the refined grid, pre-blur, apply the projection
/// approximation, propagate, then block-average.
pub fn simulate_cylinder(p: &ResolutionSweepParams) -> Result<Image2D> {
    let s = p.supersample;
    let n = p.grid * s;
    let fine_pitch = p.pixel_size / s as f64;
    let (cx, cy) = p.center();
    let to_fine = |c: f64| (c + 0.5) * s as f64 - 0.5;
    let spec = PhantomSpec {
        width: n,
        height: n,
        pixel_size: fine_pitch,
        supersample: 1,
        overlap: Overlap::Override,
        shapes: vec![Disk {
            center: (to_fine(cx), to_fine(cy)),
            radius: p.radius_px * s as f64,
            thickness: p.thickness,
            material: None,
        }],
    };
    let thickness = disk_thickness(&spec).context("rendering the cylinder")?;
    let thickness = gaussian_blur(&thickness, p.pre_blur_sim_px)?;
    let mu = p.material.mu;
    let contact = thickness.map(|t| (-mu * t).exp())?;
    drop(thickness);
    let propagated = tie_propagate(&contact, p.coefficient(), Variant::Continuous)?;
    drop(contact);
    Ok(block_downsample(&propagated, s)?)
}

/// PM and GPM edge widths on a simulated cylinder for each detector PSF.
pub fn resolution_sweep(p: &ResolutionSweepParams) -> Result<Vec<SweepRow>> {
    let pc = simulate_cylinder(p)?;
    let window = p.window();
    let cfg = RetrievalConfig::new(
        p.distance,
        p.pixel_size,
        1.0,
        Variant::Continuous,
        p.coefficient(),
    )?;
    let mut rows = Vec::new();
    for &psf in &p.psf_px {
        let blurred = gaussian_blur(&pc, psf)?;
        let measured = edge_lsf(&blurred, &window).ok().map(|f| f.fwhm);
        let fit = |variant| -> phaseret::Result<PearsonFit> {
            let retrieved = retrieve(&blurred, &cfg.with_variant(variant))?;
            let t = thickness_from_intensity(&retrieved, p.material.mu, 1.0)
                .map_err(|e| phaseret::Error::Domain(e.to_string()))?;
            edge_lsf(&t, &window)
        };
        rows.push(SweepRow::from_fits(
            psf,
            measured,
            fit(Variant::Continuous),
            fit(Variant::Discrete),
        ));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RebinSweepParams {
    /// Detector bins at the native pitch.
    pub n_detectors: usize,
    /// Native detector pitch, m.
    pub pixel_size: f64,
    /// Sub-bins per native bin used to synthesise the projections.
    pub subsample: usize,
    pub n_angles: usize,
    /// Cylinder radius, m.
    pub radius: f64,
    /// Cylinder center relative to the rotation axis, m.
    pub center: (f64, f64),
    /// Propagation distance, m.
    pub distance: f64,
    pub material: Material,
    /// Detector PSF FWHM, native pixels.
    pub psf_px: f64,
    pub factors: Vec<usize>,
    /// Profile half-width and bin width, in pixels of each rebinned slice.
    pub half_width_px: f64,
    pub bin_width_px: f64,
}

impl RebinSweepParams {
    /// 6.5 um pixels, 2.4 px PSF, 2 m propagation, 2.4 mm cylinder.
    pub fn standard(material: Material) -> Self {
        RebinSweepParams {
            n_detectors: 1024,
            pixel_size: 6.5e-6,
            subsample: 4,
            n_angles: 900,
            radius: 2.4e-3,
            center: (0.5e-3, 0.3e-3),
            distance: 2.0,
            material,
            psf_px: 2.4,
            factors: vec![1, 2, 4, 8],
            half_width_px: 10.0,
            bin_width_px: 0.25,
        }
    }

    pub fn coefficient(&self) -> f64 {
        self.material.delta * self.distance / self.material.mu
    }
}

/// Intensity sinogram of the cylinder at the native pitch: exact
/// bin-averaged chords on sub-bins, Beer-Lambert, continuous-k propagation,
/// detector blur, then integration over each native bin.
pub fn simulate_cylinder_sinogram(p: &RebinSweepParams) -> Result<phaseret::ct::Sinogram> {
    let s = p.subsample;
    let sub_pitch = p.pixel_size / s as f64;
    let phantom = CirclePhantom2D {
        circles: vec![Circle {
            center: p.center,
            radius: p.radius,
            material: "sample".into(),
            sign: 1.0,
        }],
        background: None,
    };
    let thickness = analytic_sinogram(
        &phantom,
        &uniform_angles(p.n_angles),
        p.n_detectors * s,
        sub_pitch,
        DetectorSampling::BinAverage,
    )?;
    let materials = BTreeMap::from([("sample".to_string(), p.material)]);
    let intensity = sinogram_to_intensity(
        &thickness,
        &materials,
        1.0,
        p.coefficient(),
        Variant::Continuous,
    )?;
    let blurred = blur_sinogram(&intensity, p.psf_px * s as f64)?;
    Ok(rebin_sinogram(&blurred, s)?)
}

/// Rebinning sweep over a simulated CT slice.
pub fn rebin_sweep(p: &RebinSweepParams) -> Result<Vec<SweepRow>> {
    let native = simulate_cylinder_sinogram(p)?;
    let mut rows = Vec::new();
    for &f in &p.factors {
        let sino = rebin_sinogram(&native, f)?;
        let n = sino.n_detectors();
        let pitch = sino.pixel_size();
        let c = (n as f64 - 1.0) / 2.0;
        let window = EdgeWindow {
            center: (c + p.center.0 / pitch, c + p.center.1 / pitch),
            radius_px: p.radius / pitch,
            half_width_px: p.half_width_px,
            bin_width_px: p.bin_width_px,
            arc_deg: (0.0, 360.0),
        };
        let slice = |retrieved: &phaseret::ct::Sinogram| -> phaseret::Result<Image2D> {
            fbp(&attenuation_sinogram(retrieved, 1.0)?)
        };
        let measured = slice(&sino)
            .and_then(|img| edge_lsf(&img, &window))
            .ok()
            .map(|f| f.fwhm);
        let cfg =
            RetrievalConfig::new(p.distance, pitch, 1.0, Variant::Continuous, p.coefficient())?;
        let fit = |variant| -> phaseret::Result<PearsonFit> {
            let img = slice(&retrieve_sinogram(&sino, &cfg.with_variant(variant))?)?;
            edge_lsf(&img, &window)
        };
        rows.push(SweepRow::from_fits(
            f as f64,
            measured,
            fit(Variant::Continuous),
            fit(Variant::Discrete),
        ));
    }
    Ok(rows)
}

/// Disk thickness map on a grid refined `s` times, centered on the detector
/// grid center, with an optional pre-blur in refined pixels.
fn refined_disk(
    grid: usize,
    s: usize,
    pixel_size: f64,
    radius_px: f64,
    thickness: f64,
    pre_blur_sim_px: f64,
) -> Result<Image2D> {
    let n = grid * s;
    let c = (n as f64 - 1.0) / 2.0;
    let spec = PhantomSpec {
        width: n,
        height: n,
        pixel_size: pixel_size / s as f64,
        supersample: 1,
        overlap: Overlap::Override,
        shapes: vec![Disk {
            center: (c, c),
            radius: radius_px * s as f64,
            thickness,
            material: None,
        }],
    };
    let t = disk_thickness(&spec).context("rendering the disk")?;
    Ok(gaussian_blur(&t, pre_blur_sim_px)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoMaterialParams {
    pub grid: usize,
    pub supersample: usize,
    pub pixel_size: f64,
    /// Matrix material.
    pub matrix: Material,
    /// Embedded material.
    pub inset: Material,
    /// Constant total projected thickness, m.
    pub total_thickness: f64,
    /// Projected thickness of the inset, m.
    pub inset_thickness: f64,
    /// Inset radius, detector pixels.
    pub radius_px: f64,
    pub distance: f64,
    pub pre_blur_sim_px: f64,
    /// Detector PSF beyond pixel integration, detector pixels.
    pub psf_px: f64,
    pub half_width_px: f64,
    pub bin_width_px: f64,
}

impl TwoMaterialParams {
    /// 55 um pixels, 2 m propagation, 5 mm inset rod in a 20 mm path.
    pub fn standard(matrix: Material, inset: Material) -> Self {
        TwoMaterialParams {
            grid: 256,
            supersample: 5,
            pixel_size: 55e-6,
            matrix,
            inset,
            total_thickness: 20e-3,
            inset_thickness: 5e-3,
            radius_px: 2.5e-3 / 55e-6,
            distance: 2.0,
            pre_blur_sim_px: 1.0,
            psf_px: 0.0,
            half_width_px: 8.0,
            bin_width_px: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoMaterialResult {
    pub coefficient: f64,
    pub pm: PearsonFit,
    pub gpm: PearsonFit,
    pub improvement: f64,
}

/// Propagated image of an inset disk inside a slab of constant total
/// thickness, at detector resolution.
pub fn simulate_two_material(p: &TwoMaterialParams) -> Result<Image2D> {
    let s = p.supersample;
    let t2 = refined_disk(
        p.grid,
        s,
        p.pixel_size,
        p.radius_px,
        p.inset_thickness,
        p.pre_blur_sim_px,
    )?;
    let (m1, m2) = (p.matrix.mu, p.inset.mu);
    let total = p.total_thickness;
    let contact = t2.map(|t| (-(m1 * (total - t) + m2 * t)).exp())?;
    drop(t2);
    let c = two_material_coefficient(&p.matrix, &p.inset, p.distance)?;
    let propagated = tie_propagate(&contact, c, Variant::Continuous)?;
    let detector = block_downsample(&propagated, s)?;
    Ok(gaussian_blur(&detector, p.psf_px)?)
}

/// Two-material retrieval of the inset thickness with both filter variants.
pub fn two_material_edge(p: &TwoMaterialParams) -> Result<TwoMaterialResult> {
    let img = simulate_two_material(p)?;
    let cfg = RetrievalConfig::new(p.distance, p.pixel_size, 1.0, Variant::Continuous, 0.0)?;
    let c = (p.grid as f64 - 1.0) / 2.0;
    let window = EdgeWindow {
        center: (c, c),
        radius_px: p.radius_px,
        half_width_px: p.half_width_px,
        bin_width_px: p.bin_width_px,
        arc_deg: (0.0, 360.0),
    };
    let (m1, m2) = (p.matrix.mu, p.inset.mu);
    let total = p.total_thickness;
    let fit = |variant| -> Result<PearsonFit> {
        let r = retrieve_two_material(&img, &p.matrix, &p.inset, &cfg.with_variant(variant))?;
        if let Some(v) = r.samples().iter().find(|&&v| !(v > 0.0)) {
            return Err(anyhow!("retrieved intensity {v} is not positive"));
        }
        let inset = r.map(|v| (-v.ln() - m1 * total) / (m2 - m1))?;
        Ok(edge_lsf(&inset, &window)?)
    };
    let pm = fit(Variant::Continuous)?;
    let gpm = fit(Variant::Discrete)?;
    Ok(TwoMaterialResult {
        coefficient: two_material_coefficient(&p.matrix, &p.inset, p.distance)?,
        improvement: fwhm_improvement(pm.fwhm, gpm.fwhm)?,
        pm,
        gpm,
    })
}

/// Alvarez-Macovski description of one substance: photoelectric strength
/// `a_p` (1/m in the `(E/1 keV)^-3` basis) and electron density (1/m^3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmMaterial {
    pub photoelectric: f64,
    pub electron_density: f64,
}

impl AmMaterial {
    /// Matches the given linear attenuation coefficient at one energy.
    pub fn calibrated(electron_density: f64, mu: f64, energy_ev: f64) -> Result<Self> {
        let compton = electron_density * klein_nishina(energy_ev)?;
        let photoelectric = (mu - compton) / photoelectric_basis(energy_ev);
        if !(photoelectric >= 0.0) {
            return Err(anyhow!(
                "attenuation {mu} 1/m is below the Compton term {compton} 1/m"
            ));
        }
        Ok(AmMaterial {
            photoelectric,
            electron_density,
        })
    }

    pub fn mu(&self, energy_ev: f64) -> Result<f64> {
        Ok(self.photoelectric * photoelectric_basis(energy_ev)
            + self.electron_density * klein_nishina(energy_ev)?)
    }

    pub fn delta(&self, energy_ev: f64) -> f64 {
        delta_from_electron_density(self.electron_density, energy_ev)
    }
}

/// Contact images at two energies for a thickness map of one AM material:
/// `I(E) = exp(-T (a_p (E/1 keV)^-3 + rho_e sigma_KN(E)))`.
pub fn am_contact_pair(
    thickness: &Image2D,
    material: &AmMaterial,
    energy_a_ev: f64,
    energy_b_ev: f64,
) -> Result<(Image2D, Image2D)> {
    let (mu_a, mu_b) = (material.mu(energy_a_ev)?, material.mu(energy_b_ev)?);
    Ok((
        thickness.map(|t| (-mu_a * t).exp())?,
        thickness.map(|t| (-mu_b * t).exp())?,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualEnergyParams {
    pub n_detectors: usize,
    pub pixel_size: f64,
    pub subsample: usize,
    pub n_angles: usize,
    pub material: AmMaterial,
    pub energy_a_ev: f64,
    pub energy_b_ev: f64,
    /// Cylinder radius, m.
    pub radius: f64,
    /// Cylinder center relative to the rotation axis, m.
    pub center: (f64, f64),
    pub distance: f64,
    /// Detector PSF beyond pixel integration, detector pixels.
    pub psf_px: f64,
    /// Interior region for the density check: radius below this fraction.
    pub interior_fraction: f64,
    pub half_width_px: f64,
    pub bin_width_px: f64,
}

impl DualEnergyParams {
    /// 55 um pixels, 30/40 keV, 3 mm radius cylinder, 360 angles.
    pub fn standard(material: AmMaterial, distance: f64) -> Self {
        DualEnergyParams {
            n_detectors: 192,
            pixel_size: 55e-6,
            subsample: 4,
            n_angles: 360,
            material,
            energy_a_ev: 30e3,
            energy_b_ev: 40e3,
            radius: 3e-3,
            center: (0.4e-3, 0.25e-3),
            distance,
            psf_px: 0.0,
            interior_fraction: 0.8,
            half_width_px: 8.0,
            bin_width_px: 0.25,
        }
    }
}

/// Intensity sinograms at both energies: exact chords on sub-bins, AM
/// attenuation, continuous-k propagation, detector blur and pixel integration.
pub fn simulate_dual_energy_sinograms(p: &DualEnergyParams) -> Result<(Sinogram, Sinogram)> {
    let s = p.subsample;
    let phantom = CirclePhantom2D {
        circles: vec![Circle {
            center: p.center,
            radius: p.radius,
            material: "sample".into(),
            sign: 1.0,
        }],
        background: None,
    };
    let thickness = analytic_sinogram(
        &phantom,
        &uniform_angles(p.n_angles),
        p.n_detectors * s,
        p.pixel_size / s as f64,
        DetectorSampling::BinAverage,
    )?;
    let one = |e: f64| -> Result<Sinogram> {
        let mu = p.material.mu(e)?;
        let delta = p.material.delta(e);
        let mat = Material::from_attenuation(delta, mu, e)?;
        let materials = BTreeMap::from([("sample".to_string(), mat)]);
        let c = delta * p.distance / mu;
        let intensity = sinogram_to_intensity(&thickness, &materials, 1.0, c, Variant::Continuous)?;
        let blurred = blur_sinogram(&intensity, p.psf_px * s as f64)?;
        Ok(rebin_sinogram(&blurred, s)?)
    };
    Ok((one(p.energy_a_ev)?, one(p.energy_b_ev)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualEnergyVariantResult {
    pub variant: Variant,
    /// Reconstructed electron density, 1/m^3.
    pub electron_density: Image2D,
    /// Relative error of the mean reconstructed electron density in the interior.
    pub interior_error: f64,
    pub lsf: phaseret::Result<PearsonFit>,
}

/// CT of a cylinder at two energies, decomposed with both filter variants.
pub fn dual_energy_cylinder(p: &DualEnergyParams) -> Result<Vec<DualEnergyVariantResult>> {
    let (a, b) = simulate_dual_energy_sinograms(p)?;
    let n = p.n_detectors;
    let mid = (n as f64 - 1.0) / 2.0;
    let center = (
        mid + p.center.0 / p.pixel_size,
        mid + p.center.1 / p.pixel_size,
    );
    let radius_px = p.radius / p.pixel_size;
    let interior: Vec<bool> = (0..n * n)
        .map(|i| {
            let (x, y) = ((i % n) as f64 - center.0, (i / n) as f64 - center.1);
            x.hypot(y) < p.interior_fraction * radius_px
        })
        .collect();
    let truth = p.material.electron_density;
    let window = EdgeWindow {
        center,
        radius_px,
        half_width_px: p.half_width_px,
        bin_width_px: p.bin_width_px,
        arc_deg: (0.0, 360.0),
    };
    [Variant::Continuous, Variant::Discrete]
        .into_iter()
        .map(|variant| {
            let cfg =
                DualEnergyConfig::new(p.energy_a_ev, p.energy_b_ev, p.distance, variant, 1.0)?;
            let (_, rho) = decompose_sinograms(&a, &b, &cfg)?;
            let slice = fbp(&rho)?;
            let (sum, count) = slice
                .samples()
                .iter()
                .zip(&interior)
                .filter(|(_, &m)| m)
                .fold((0.0, 0usize), |(s, c), (&v, _)| (s + v, c + 1));
            let interior_error = (sum / count as f64 - truth).abs() / truth;
            let lsf = edge_lsf(&slice, &window);
            Ok(DualEnergyVariantResult {
                variant,
                electron_density: slice,
                interior_error,
                lsf,
            })
        })
        .collect()
}

/// One sampled slice of a filter-comparison map.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferCurve {
    /// `h_pm`, `h_gpm`, `ratio`, `d` or `dbar`.
    pub quantity: &'static str,
    pub path: CurvePath,
    /// Dimensionless filter strength `delta Delta / (mu W^2)`.
    pub parameter: f64,
    /// `(W k, value)` pairs from DC outwards.
    pub points: Vec<(f64, f64)>,
}

impl TransferCurve {
    pub fn path_name(&self) -> &'static str {
        match self.path {
            CurvePath::Axis => "axis",
            CurvePath::Diagonal => "diagonal",
        }
    }

    /// `<quantity>_<path>_p<parameter>.csv`
    pub fn file_name(&self) -> String {
        format!(
            "{}_{}_p{}.csv",
            self.quantity,
            self.path_name(),
            self.parameter
        )
    }
}

/// Axis and diagonal curves of `H_PM`, `H_GPM`, their ratio, the fractional
/// difference `D` and, given a PSF, the blurred difference. Works on a square
/// `grid`-point map with unit pitch so that the coefficient equals the
/// dimensionless parameter.
pub fn transfer_curves(
    sweep: &[f64],
    grid: usize,
    psf_fwhm_px: Option<f64>,
) -> Result<Vec<TransferCurve>> {
    if sweep.is_empty() {
        return Err(anyhow!("transfer sweep is empty"));
    }
    let cont = frequency_grid(grid, grid, 1.0, Variant::Continuous)?;
    let disc = cont.with_variant(Variant::Discrete);
    let mut curves = Vec::new();
    for &p in sweep {
        let pm = FilterParams::new(p, Variant::Continuous)?;
        let gpm = FilterParams::new(p, Variant::Discrete)?;
        let mut maps: Vec<(&'static str, TransferMap)> = vec![
            ("h_pm", retrieval_transfer(&cont, &pm)?),
            ("h_gpm", retrieval_transfer(&disc, &gpm)?),
            ("ratio", filter_ratio(&cont, &pm, &gpm)?),
            ("d", fractional_difference(&cont, p, None)?),
        ];
        if let Some(psf) = psf_fwhm_px {
            maps.push(("dbar", fractional_difference(&cont, p, Some(psf))?));
        }
        for (quantity, map) in &maps {
            for path in [CurvePath::Axis, CurvePath::Diagonal] {
                curves.push(TransferCurve {
                    quantity,
                    path,
                    parameter: p,
                    points: curve_extract(map, path)?,
                });
            }
        }
    }
    Ok(curves)
}
