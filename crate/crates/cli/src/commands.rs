//! One function per subcommand. Each reads its inputs, runs the library
//! stages, writes its outputs and a manifest, and returns a short summary.

use crate::config::*;
use crate::error::{CliError, CliResult};
use crate::experiments::{
    edge_lsf, edge_profiles, rebin_sweep, resolution_sweep, transfer_curves, EdgeWindow,
    RebinSweepParams, ResolutionSweepParams, SweepRow,
};
use crate::io::{self, Cell, ImageMeta};
use crate::materials::MaterialEntry;
use phaseret::ct::{attenuation_sinogram, fbp, retrieve_sinogram, uniform_angles, Sinogram};
use phaseret::retrieval::{
    dual_energy_decompose, retrieve, retrieve_two_material, DualEnergyConfig, RetrievalConfig,
};
use phaseret::simulate::{
    add_poisson_noise, disk_thickness, gaussian_blur, tie_propagate, Disk, Overlap, PhantomSpec,
};
use phaseret::Variant;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub summary: String,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("configuration serializes to JSON")
}

fn finish(
    command: &str,
    config: Value,
    derived: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    manifest: PathBuf,
    summary: String,
) -> CliResult<Outcome> {
    io::write_manifest(&manifest, command, config, derived, &inputs, &outputs)?;
    Ok(Outcome {
        outputs,
        manifest,
        summary,
    })
}

fn required_path(value: &str, key: &str) -> CliResult<PathBuf> {
    if value.is_empty() {
        return Err(CliError::Usage(format!("`{key}` is required")));
    }
    Ok(PathBuf::from(value))
}

fn positive(value: f64, key: &str) -> CliResult<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::Usage(format!(
            "`{key}` must be positive, got {value}"
        )))
    }
}

pub fn transfer(cfg: &TransferConfig) -> CliResult<Outcome> {
    if cfg.sweep.is_empty() {
        return Err(CliError::Usage(
            "`sweep` must list at least one value".into(),
        ));
    }
    if let Some(v) = cfg.sweep.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(CliError::Usage(format!(
            "sweep value {v} must be finite and >= 0"
        )));
    }
    if cfg.grid < 2 || cfg.grid % 2 != 0 {
        return Err(CliError::Usage(format!(
            "`grid` must be even and >= 2, got {}",
            cfg.grid
        )));
    }
    if let Some(psf) = cfg.psf_fwhm_px {
        positive(psf, "psf_fwhm_px")?;
    }
    let dir = required_path(&cfg.output, "output")?;
    let curves = transfer_curves(&cfg.sweep, cfg.grid, cfg.psf_fwhm_px)?;
    let mut outputs = Vec::new();
    for c in &curves {
        let path = dir.join(c.file_name());
        let rows: Vec<Vec<Cell>> = c
            .points
            .iter()
            .map(|&(k, v)| vec![Cell::Float(k), Cell::Float(v)])
            .collect();
        io::write_csv(&path, &["normalized_k", "value"], &rows)?;
        outputs.push(path);
    }
    let summary = format!("wrote {} curves to {}", outputs.len(), dir.display());
    finish(
        "transfer",
        to_value(cfg),
        json!({"pixel_size_m": 1.0, "coefficient_m2": cfg.sweep}),
        vec![],
        outputs,
        dir.join("manifest.json"),
        summary,
    )
}

fn sweep_summary(label: &str, rows: &[SweepRow]) -> String {
    rows.iter()
        .map(|r| match r.improvement {
            Some(g) => format!("{label} {}: improvement {:.2} %", r.setting, 100.0 * g),
            None => format!(
                "{label} {}: {}",
                r.setting,
                r.error.as_deref().unwrap_or("no result")
            ),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn resolution_params(cfg: &ResolutionSweepConfig) -> CliResult<ResolutionSweepParams> {
    let material = cfg.material.material()?;
    let mut p = match cfg.preset {
        Preset::Full => ResolutionSweepParams::full(material),
        Preset::Fast => ResolutionSweepParams::fast(material),
    };
    if let Some(v) = cfg.grid {
        p.grid = v;
    }
    if let Some(v) = cfg.supersample {
        p.supersample = v;
    }
    if let Some(v) = cfg.pixel_size_um {
        p.pixel_size = positive(v, "pixel_size_um")? * 1e-6;
    }
    if let Some(v) = cfg.radius_px {
        p.radius_px = positive(v, "radius_px")?;
    }
    if let Some(v) = cfg.thickness_mm {
        p.thickness = v * 1e-3;
    }
    if let Some(v) = cfg.distance_mm {
        p.distance = v * 1e-3;
    }
    if let Some(v) = cfg.pre_blur_sim_px {
        p.pre_blur_sim_px = v;
    }
    if let Some(v) = &cfg.psf_fwhm_px {
        p.psf_px = v.clone();
    }
    if let Some(v) = cfg.half_width_px {
        p.half_width_px = positive(v, "half_width_px")?;
    }
    if let Some(v) = cfg.bin_width_px {
        p.bin_width_px = positive(v, "bin_width_px")?;
    }
    if p.psf_px.is_empty() {
        return Err(CliError::Usage(
            "`psf_fwhm_px` must list at least one value".into(),
        ));
    }
    if p.grid < 2 || p.supersample == 0 {
        return Err(CliError::Usage(
            "`grid` must be >= 2 and `supersample` >= 1".into(),
        ));
    }
    Ok(p)
}

pub fn resolution_sweep_cmd(cfg: &ResolutionSweepConfig) -> CliResult<Outcome> {
    let out = required_path(&cfg.output, "output")?;
    let p = resolution_params(cfg)?;
    let rows = resolution_sweep(&p)?;
    let w = p.pixel_size;
    let px = |m: Option<f64>| Cell::from(m.map(|v| v / w));
    let table: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                Cell::Float(r.setting),
                px(r.measured_fwhm),
                px(r.pm.map(|f| f.fwhm)),
                px(r.gpm.map(|f| f.fwhm)),
                Cell::from(r.pm.map(|f| f.exponent)),
                Cell::from(r.gpm.map(|f| f.exponent)),
                Cell::from(r.improvement),
                Cell::Text(r.error.clone().unwrap_or_default()),
            ]
        })
        .collect();
    io::write_csv(
        &out,
        &[
            "psf_fwhm_px",
            "measured_fwhm_px",
            "gamma_pm_px",
            "gamma_gpm_px",
            "exponent_pm",
            "exponent_gpm",
            "improvement",
            "error",
        ],
        &table,
    )?;
    finish(
        "resolution-sweep",
        to_value(cfg),
        json!({
            "material": cfg.material.resolve()?,
            "coefficient_m2": p.coefficient(),
            "grid": p.grid,
            "supersample": p.supersample,
            "pixel_size_m": p.pixel_size,
            "radius_px": p.radius_px,
            "thickness_m": p.thickness,
            "distance_m": p.distance,
            "pre_blur_sim_px": p.pre_blur_sim_px,
            "psf_fwhm_px": p.psf_px,
            "half_width_px": p.half_width_px,
            "bin_width_px": p.bin_width_px,
        }),
        vec![],
        vec![out.clone()],
        io::manifest_path(&out),
        sweep_summary("psf", &rows),
    )
}

pub fn rebin_params(cfg: &RebinSweepConfig) -> CliResult<RebinSweepParams> {
    let mut p = RebinSweepParams::standard(cfg.material.material()?);
    if let Some(v) = cfg.n_detectors {
        p.n_detectors = v;
    }
    if let Some(v) = cfg.pixel_size_um {
        p.pixel_size = positive(v, "pixel_size_um")? * 1e-6;
    }
    if let Some(v) = cfg.subsample {
        p.subsample = v;
    }
    if let Some(v) = cfg.n_angles {
        p.n_angles = v;
    }
    if let Some(v) = cfg.radius_mm {
        p.radius = positive(v, "radius_mm")? * 1e-3;
    }
    if let Some([x, y]) = cfg.center_mm {
        p.center = (x * 1e-3, y * 1e-3);
    }
    if let Some(v) = cfg.distance_m {
        p.distance = v;
    }
    if let Some(v) = cfg.psf_fwhm_px {
        p.psf_px = v;
    }
    if let Some(v) = &cfg.factors {
        p.factors = v.clone();
    }
    if let Some(v) = cfg.half_width_px {
        p.half_width_px = positive(v, "half_width_px")?;
    }
    if let Some(v) = cfg.bin_width_px {
        p.bin_width_px = positive(v, "bin_width_px")?;
    }
    if p.factors.is_empty() || p.factors.contains(&0) {
        return Err(CliError::Usage(
            "`factors` must list positive integers".into(),
        ));
    }
    if p.subsample == 0 || p.n_angles < 2 {
        return Err(CliError::Usage(
            "`subsample` must be >= 1 and `n_angles` >= 2".into(),
        ));
    }
    Ok(p)
}

pub fn rebin_sweep_cmd(cfg: &RebinSweepConfig) -> CliResult<Outcome> {
    let out = required_path(&cfg.output, "output")?;
    let p = rebin_params(cfg)?;
    let rows = rebin_sweep(&p)?;
    let um = |m: Option<f64>| Cell::from(m.map(|v| v * 1e6));
    let table: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                Cell::Int(r.setting as i64),
                Cell::Float(r.setting * p.pixel_size * 1e6),
                um(r.measured_fwhm),
                um(r.pm.map(|f| f.fwhm)),
                um(r.gpm.map(|f| f.fwhm)),
                Cell::from(r.pm.map(|f| f.exponent)),
                Cell::from(r.gpm.map(|f| f.exponent)),
                Cell::from(r.improvement),
                Cell::Text(r.error.clone().unwrap_or_default()),
            ]
        })
        .collect();
    io::write_csv(
        &out,
        &[
            "rebin_factor",
            "pixel_size_um",
            "measured_fwhm_um",
            "gamma_pm_um",
            "gamma_gpm_um",
            "exponent_pm",
            "exponent_gpm",
            "improvement",
            "error",
        ],
        &table,
    )?;
    finish(
        "rebin-sweep",
        to_value(cfg),
        json!({
            "material": cfg.material.resolve()?,
            "coefficient_m2": p.coefficient(),
            "n_detectors": p.n_detectors,
            "pixel_size_m": p.pixel_size,
            "subsample": p.subsample,
            "n_angles": p.n_angles,
            "radius_m": p.radius,
            "center_m": [p.center.0, p.center.1],
            "distance_m": p.distance,
            "psf_fwhm_px": p.psf_px,
            "factors": p.factors,
            "half_width_px": p.half_width_px,
            "bin_width_px": p.bin_width_px,
        }),
        vec![],
        vec![out.clone()],
        io::manifest_path(&out),
        sweep_summary("factor", &rows),
    )
}

pub fn phantom(cfg: &PhantomConfig) -> CliResult<Outcome> {
    let out = required_path(&cfg.output, "output")?;
    let spec = PhantomSpec {
        width: cfg.width,
        height: cfg.height,
        pixel_size: positive(cfg.pixel_size_um, "pixel_size_um")? * 1e-6,
        supersample: cfg.supersample,
        overlap: match cfg.overlap {
            OverlapName::Override => Overlap::Override,
            OverlapName::Add => Overlap::Add,
        },
        shapes: cfg
            .disks
            .iter()
            .map(|d| Disk {
                center: (d.center_px[0], d.center_px[1]),
                radius: d.radius_px,
                thickness: d.thickness_mm * 1e-3,
                material: d.material.clone(),
            })
            .collect(),
    };
    let img = disk_thickness(&spec)?;
    io::write_pfi(
        &out,
        &img,
        &ImageMeta::new(spec.pixel_size, "projected thickness, m"),
    )?;
    let summary = format!(
        "{}x{} thickness map with {} disks",
        img.width(),
        img.height(),
        spec.shapes.len()
    );
    finish(
        "phantom",
        to_value(cfg),
        Value::Null,
        vec![],
        vec![out.clone()],
        io::manifest_path(&out),
        summary,
    )
}

/// Coefficient from an explicit value or `delta * distance / mu`.
fn coefficient(
    explicit: Option<f64>,
    material: Option<&MaterialEntry>,
    distance: f64,
) -> CliResult<f64> {
    match (explicit, material) {
        (Some(c), _) => Ok(c),
        (None, Some(m)) if m.mu_per_m > 0.0 => Ok(m.delta * distance / m.mu_per_m),
        (None, Some(m)) => Err(CliError::Usage(format!(
            "material {} has zero attenuation",
            m.name
        ))),
        (None, None) => Err(CliError::Usage(
            "give `coefficient_m2` or `material`".into(),
        )),
    }
}

fn resolve_optional(spec: &Option<MaterialSpec>) -> CliResult<Option<MaterialEntry>> {
    spec.as_ref().map(MaterialSpec::resolve).transpose()
}

pub fn propagate(cfg: &PropagateConfig) -> CliResult<Outcome> {
    let input = required_path(&cfg.input, "input")?;
    let out = required_path(&cfg.output, "output")?;
    let material = resolve_optional(&cfg.material)?;
    let c = coefficient(cfg.coefficient_m2, material.as_ref(), cfg.distance_m)?;
    let i0 = positive(cfg.incident_intensity, "incident_intensity")?;
    let (img, meta) = io::read_pfi(&input)?;
    let contact = match cfg.input_kind {
        ImageKind::Intensity => img,
        ImageKind::Thickness => {
            let mu = material
                .as_ref()
                .ok_or_else(|| CliError::Usage("thickness input needs `material`".into()))?
                .mu_per_m;
            img.map(|t| i0 * (-mu * t).exp())?
        }
    };
    let mut result = tie_propagate(&contact, c, cfg.variant.into())?;
    result = gaussian_blur(&result, cfg.psf_fwhm_px)?;
    if let Some(noise) = &cfg.noise {
        result = add_poisson_noise(&result, noise.counts_per_unit, noise.seed)?;
    }
    let out_meta = ImageMeta {
        pixel_size_m: meta.pixel_size_m,
        energy_ev: material
            .as_ref()
            .map(|m| m.energy_kev * 1e3)
            .or(meta.energy_ev),
        distance_m: Some(cfg.distance_m),
        description: "propagated intensity".into(),
    };
    io::write_pfi(&out, &result, &out_meta)?;
    finish(
        "propagate",
        to_value(cfg),
        json!({"material": material, "coefficient_m2": c}),
        vec![input],
        vec![out.clone()],
        io::manifest_path(&out),
        format!("propagated with coefficient {c:e} m^2"),
    )
}

pub fn retrieve_cmd(cfg: &RetrieveConfig) -> CliResult<Outcome> {
    let input = required_path(&cfg.input, "input")?;
    let out = required_path(&cfg.output, "output")?;
    let material = resolve_optional(&cfg.material)?;
    let matrix = resolve_optional(&cfg.matrix)?;
    let (img, meta) = io::read_pfi(&input)?;
    let variant: Variant = cfg.variant.into();
    let mut base = RetrievalConfig::new(
        cfg.distance_m,
        meta.pixel_size_m,
        cfg.incident_intensity,
        variant,
        0.0,
    )?;
    let retrieved = match (&matrix, &material, cfg.coefficient_m2) {
        (Some(m1), Some(m2), None) => {
            retrieve_two_material(&img, &m1.material()?, &m2.material()?, &base)?
        }
        (Some(_), None, None) => {
            return Err(CliError::Usage(
                "two-material retrieval needs `material` as well".into(),
            ))
        }
        _ => {
            base.coefficient = coefficient(cfg.coefficient_m2, material.as_ref(), cfg.distance_m)?;
            retrieve(&img, &base)?
        }
    };
    let retrieved = match cfg.clamp_min {
        Some(lo) => retrieved.map(|v| v.max(lo))?,
        None => retrieved,
    };
    let (result, description) = match cfg.output_kind {
        ImageKind::Intensity => (retrieved, "retrieved contact intensity"),
        ImageKind::Thickness => {
            if matrix.is_some() {
                return Err(CliError::Usage(
                    "thickness output is only defined for single-material retrieval".into(),
                ));
            }
            let mu = material
                .as_ref()
                .ok_or_else(|| CliError::Usage("thickness output needs `material`".into()))?
                .mu_per_m;
            if let Some(v) = retrieved.samples().iter().find(|&&v| !(v > 0.0)) {
                return Err(CliError::Numerical(format!(
                    "retrieved intensity {v} is not positive; set `clamp_min`"
                )));
            }
            let i0 = cfg.incident_intensity;
            (
                retrieved.map(|v| -(v / i0).ln() / mu)?,
                "projected thickness, m",
            )
        }
    };
    let out_meta = ImageMeta {
        description: description.into(),
        distance_m: Some(cfg.distance_m),
        ..meta
    };
    io::write_pfi(&out, &result, &out_meta)?;
    finish(
        "retrieve",
        to_value(cfg),
        json!({"material": material, "matrix": matrix, "variant": variant.name()}),
        vec![input],
        vec![out.clone()],
        io::manifest_path(&out),
        format!(
            "retrieved {}x{} image ({})",
            result.width(),
            result.height(),
            variant.name()
        ),
    )
}

pub fn ct(cfg: &CtConfig) -> CliResult<Outcome> {
    let input = required_path(&cfg.input, "input")?;
    let out = required_path(&cfg.output, "output")?;
    let (n_det, n_angles, samples, meta) = io::read_raw_pfi(&input)?;
    let sino = Sinogram::new(uniform_angles(n_angles), n_det, meta.pixel_size_m, samples)
        .map_err(|e| CliError::Format(format!("{}: {e}", input.display())))?;
    let material = resolve_optional(&cfg.material)?;
    let sino = if cfg.coefficient_m2.is_some() || material.is_some() {
        let c = coefficient(cfg.coefficient_m2, material.as_ref(), cfg.distance_m)?;
        let rc = RetrievalConfig::new(
            cfg.distance_m,
            meta.pixel_size_m,
            cfg.incident_intensity,
            cfg.variant.into(),
            c,
        )?;
        retrieve_sinogram(&sino, &rc)?
    } else {
        sino
    };
    let line_integrals = match cfg.input_kind {
        SinogramKind::Intensity => attenuation_sinogram(
            &sino,
            positive(cfg.incident_intensity, "incident_intensity")?,
        )?,
        SinogramKind::Attenuation => sino,
    };
    let slice = fbp(&line_integrals)?;
    let out_meta = ImageMeta {
        pixel_size_m: meta.pixel_size_m,
        energy_ev: meta.energy_ev,
        distance_m: meta.distance_m,
        description: "reconstructed slice, line-integral units per m".into(),
    };
    io::write_pfi(&out, &slice, &out_meta)?;
    finish(
        "ct",
        to_value(cfg),
        json!({"material": material, "n_angles": n_angles, "n_detectors": n_det}),
        vec![input],
        vec![out.clone()],
        io::manifest_path(&out),
        format!("reconstructed {n_det}x{n_det} slice from {n_angles} angles"),
    )
}

/// `<prefix>_<suffix>.pfi`
fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let name = prefix
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    prefix.with_file_name(format!("{name}_{suffix}.pfi"))
}

pub fn decompose(cfg: &DecomposeConfig) -> CliResult<Outcome> {
    let a = required_path(&cfg.input_a, "input_a")?;
    let b = required_path(&cfg.input_b, "input_b")?;
    let prefix = required_path(&cfg.output, "output")?;
    let dc = DualEnergyConfig::new(
        cfg.energy_a_kev * 1e3,
        cfg.energy_b_kev * 1e3,
        cfg.distance_m,
        cfg.variant.into(),
        cfg.incident_intensity,
    )?;
    let (img_a, meta) = io::read_pfi(&a)?;
    let (img_b, _) = io::read_pfi(&b)?;
    let result = dual_energy_decompose(&img_a, &img_b, &dc)?;
    let p_path = suffixed(&prefix, "photoelectric");
    let rho_path = suffixed(&prefix, "electron_density");
    let meta_for = |description: &str| ImageMeta {
        pixel_size_m: meta.pixel_size_m,
        energy_ev: None,
        distance_m: Some(cfg.distance_m),
        description: description.into(),
    };
    io::write_pfi(
        &p_path,
        &result.photoelectric,
        &meta_for("photoelectric line integral, (E/1 keV)^-3 basis"),
    )?;
    io::write_pfi(
        &rho_path,
        &result.electron_density,
        &meta_for("projected electron density, 1/m^2"),
    )?;
    finish(
        "decompose",
        to_value(cfg),
        Value::Null,
        vec![a, b],
        vec![p_path, rho_path],
        io::manifest_path(&prefix),
        "wrote photoelectric and electron density maps".into(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct FitReport {
    amplitude: f64,
    center_m: f64,
    fwhm_m: f64,
    fwhm_px: f64,
    exponent: f64,
    residual_rms: f64,
    iterations: usize,
    /// `[amplitude, center_m, fwhm_m, exponent]`, one sigma.
    uncertainties: Option<[f64; 4]>,
}

pub fn lsf(cfg: &LsfConfig) -> CliResult<Outcome> {
    let input = required_path(&cfg.input, "input")?;
    let out = required_path(&cfg.output, "output")?;
    let (img, _) = io::read_pfi(&input)?;
    let center = cfg.center_px.map_or(
        (
            (img.width() as f64 - 1.0) / 2.0,
            (img.height() as f64 - 1.0) / 2.0,
        ),
        |[x, y]| (x, y),
    );
    let window = EdgeWindow {
        center,
        radius_px: positive(cfg.radius_px, "radius_px")?,
        half_width_px: positive(cfg.half_width_px, "half_width_px")?,
        bin_width_px: positive(cfg.bin_width_px, "bin_width_px")?,
        arc_deg: (cfg.arc_deg[0], cfg.arc_deg[1]),
    };
    let fit = edge_lsf(&img, &window)?;
    let w = img.pixel_size();
    let report = FitReport {
        amplitude: fit.amplitude,
        center_m: fit.center,
        fwhm_m: fit.fwhm,
        fwhm_px: fit.fwhm / w,
        exponent: fit.exponent,
        residual_rms: fit.residual_rms,
        iterations: fit.iterations,
        uncertainties: fit
            .uncertainties
            .map(|u| [u.amplitude, u.center, u.fwhm, u.exponent]),
    };
    io::write_json(&out, &report)?;
    let mut outputs = vec![out.clone()];
    if let Some(profile_out) = &cfg.profile_output {
        let profile_out = PathBuf::from(profile_out);
        let (profile, derivative) = edge_profiles(&img, &window)?;
        let rows: Vec<Vec<Cell>> = derivative
            .radii
            .iter()
            .zip(&derivative.values)
            .zip(&profile.values)
            .map(|((&r, &d), &e)| {
                vec![
                    Cell::Float(r),
                    Cell::Float(e),
                    Cell::Float(d),
                    Cell::Float(fit.evaluate(r)),
                ]
            })
            .collect();
        io::write_csv(&profile_out, &["radius_m", "esf", "lsf", "lsf_fit"], &rows)?;
        outputs.push(profile_out);
    }
    finish(
        "lsf",
        to_value(cfg),
        json!({"center_px": [center.0, center.1]}),
        vec![input],
        outputs,
        io::manifest_path(&out),
        format!(
            "FWHM {:.4} px, exponent {:.3}",
            report.fwhm_px, report.exponent
        ),
    )
}

pub fn materials(output: Option<&Path>) -> CliResult<String> {
    let table = crate::materials::builtin_table();
    match output {
        Some(path) => {
            io::write_json(path, &table)?;
            Ok(format!(
                "wrote {} entries to {}",
                table.len(),
                path.display()
            ))
        }
        None => serde_json::to_string_pretty(&table).map_err(|e| CliError::Format(e.to_string())),
    }
}
