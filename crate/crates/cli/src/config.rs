//! JSON run configurations. Every physical quantity carries its unit in the
//! key name; unknown keys are rejected. Values from a config file are
//! overridden by `key=value` flags (dotted keys reach nested tables).

use crate::error::{CliError, CliResult};
use crate::materials::{lookup, MaterialEntry};
use phaseret::retrieval::Material;
use phaseret::Variant;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::Path;

pub const CONFIG_VERSION: u32 = 1;

/// Reads an optional config file, applies overrides and deserializes.
pub fn load<T: DeserializeOwned + Versioned>(
    file: Option<&Path>,
    overrides: &[String],
) -> CliResult<T> {
    let mut root = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => Value::Object(Map::new()),
    };
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    let cfg: T = serde_json::from_value(root).map_err(|e| CliError::Usage(e.to_string()))?;
    if cfg.version() != CONFIG_VERSION {
        return Err(CliError::Usage(format!(
            "config version {} is not supported (expected {CONFIG_VERSION})",
            cfg.version()
        )));
    }
    Ok(cfg)
}

/// `a.b=v` sets `root["a"]["b"]`. The value is parsed as JSON when possible
/// and taken as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Usage(format!("empty key segment in {key:?}")));
        }
        let obj = match node {
            Value::Object(m) => m,
            _ => {
                return Err(CliError::Usage(format!(
                    "{key:?} descends into a non-table value"
                )))
            }
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

pub trait Versioned {
    fn version(&self) -> u32;
}

macro_rules! versioned {
    ($($t:ty),*) => {$(
        impl Versioned for $t {
            fn version(&self) -> u32 {
                self.version
            }
        }
    )*};
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    /// Continuous Laplacian (PM).
    #[default]
    Continuous,
    /// Discrete Laplacian (GPM).
    Discrete,
}

impl From<VariantName> for Variant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Continuous => Variant::Continuous,
            VariantName::Discrete => Variant::Discrete,
        }
    }
}

/// A built-in material, optionally with its constants replaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub name: String,
    pub energy_kev: f64,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub mu_per_m: Option<f64>,
}

impl MaterialSpec {
    pub fn new(name: &str, energy_kev: f64) -> Self {
        MaterialSpec {
            name: name.into(),
            energy_kev,
            delta: None,
            mu_per_m: None,
        }
    }

    /// Table entry with overrides applied; the provenance notes any override.
    pub fn resolve(&self) -> CliResult<MaterialEntry> {
        let base = lookup(&self.name, self.energy_kev);
        let (delta, mu, mut provenance) = match (&base, self.delta, self.mu_per_m) {
            (_, Some(d), Some(m)) => (d, m, "user supplied".to_string()),
            (Some(b), d, m) => (
                d.unwrap_or(b.delta),
                m.unwrap_or(b.mu_per_m),
                b.provenance.clone(),
            ),
            (None, _, _) => {
                return Err(CliError::Usage(format!(
                    "material {:?} at {} keV is not in the built-in table; give delta and mu_per_m",
                    self.name, self.energy_kev
                )))
            }
        };
        if base.is_some() && (self.delta.is_some() || self.mu_per_m.is_some()) {
            provenance = format!("{provenance}; overridden by configuration");
        }
        let m = Material::from_attenuation(delta, mu, self.energy_kev * 1e3)?;
        Ok(MaterialEntry {
            name: base.map_or_else(|| self.name.clone(), |b| b.name),
            energy_kev: self.energy_kev,
            delta: m.delta,
            beta: m.beta,
            mu_per_m: m.mu,
            provenance,
        })
    }

    pub fn material(&self) -> CliResult<Material> {
        Ok(self.resolve()?.material()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    /// Square map size used to sample the filters.
    pub grid: usize,
    /// Dimensionless filter strengths `delta Delta / (mu W^2)`.
    pub sweep: Vec<f64>,
    /// Detector PSF for the blurred fractional difference; `null` skips it.
    pub psf_fwhm_px: Option<f64>,
    /// Output directory.
    pub output: String,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            version: CONFIG_VERSION,
            grid: 256,
            sweep: vec![0.1, 1.0, 10.0, 100.0, 1000.0],
            psf_fwhm_px: Some(1.0),
            output: "transfer".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Full,
    Fast,
}

/// Preset geometry with optional per-field replacements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolutionSweepConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub preset: Preset,
    pub material: MaterialSpec,
    pub grid: Option<usize>,
    pub supersample: Option<usize>,
    pub pixel_size_um: Option<f64>,
    pub radius_px: Option<f64>,
    pub thickness_mm: Option<f64>,
    pub distance_mm: Option<f64>,
    pub pre_blur_sim_px: Option<f64>,
    pub psf_fwhm_px: Option<Vec<f64>>,
    pub half_width_px: Option<f64>,
    pub bin_width_px: Option<f64>,
    pub output: String,
}

impl Default for ResolutionSweepConfig {
    fn default() -> Self {
        ResolutionSweepConfig {
            version: CONFIG_VERSION,
            preset: Preset::Full,
            material: MaterialSpec::new("water", 24.0),
            grid: None,
            supersample: None,
            pixel_size_um: None,
            radius_px: None,
            thickness_mm: None,
            distance_mm: None,
            pre_blur_sim_px: None,
            psf_fwhm_px: None,
            half_width_px: None,
            bin_width_px: None,
            output: "resolution_sweep.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RebinSweepConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub material: MaterialSpec,
    pub n_detectors: Option<usize>,
    pub pixel_size_um: Option<f64>,
    pub subsample: Option<usize>,
    pub n_angles: Option<usize>,
    pub radius_mm: Option<f64>,
    pub center_mm: Option<[f64; 2]>,
    pub distance_m: Option<f64>,
    pub psf_fwhm_px: Option<f64>,
    pub factors: Option<Vec<usize>>,
    pub half_width_px: Option<f64>,
    pub bin_width_px: Option<f64>,
    pub output: String,
}

impl Default for RebinSweepConfig {
    fn default() -> Self {
        RebinSweepConfig {
            version: CONFIG_VERSION,
            material: MaterialSpec::new("pmma", 24.0),
            n_detectors: None,
            pixel_size_um: None,
            subsample: None,
            n_angles: None,
            radius_mm: None,
            center_mm: None,
            distance_m: None,
            psf_fwhm_px: None,
            factors: None,
            half_width_px: None,
            bin_width_px: None,
            output: "rebin_sweep.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OverlapName {
    #[default]
    Override,
    Add,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskSpec {
    /// `(x, y)` in pixel coordinates.
    pub center_px: [f64; 2],
    pub radius_px: f64,
    pub thickness_mm: f64,
    #[serde(default)]
    pub material: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub pixel_size_um: f64,
    pub supersample: usize,
    pub overlap: OverlapName,
    pub disks: Vec<DiskSpec>,
    pub output: String,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            version: CONFIG_VERSION,
            width: 256,
            height: 256,
            pixel_size_um: 25.0,
            supersample: 4,
            overlap: OverlapName::Override,
            disks: vec![DiskSpec {
                center_px: [127.5, 127.5],
                radius_px: 80.25,
                thickness_mm: 1.0,
                material: None,
            }],
            output: "phantom.pfi".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ImageKind {
    #[default]
    Intensity,
    /// Projected thickness in meters.
    Thickness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Expected photon counts for a unit intensity.
    pub counts_per_unit: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagateConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub input: String,
    pub input_kind: ImageKind,
    /// Needed for thickness input and when no coefficient is given.
    pub material: Option<MaterialSpec>,
    /// Replaces `delta Delta / mu` when set.
    pub coefficient_m2: Option<f64>,
    pub distance_m: f64,
    pub variant: VariantName,
    pub incident_intensity: f64,
    /// Detector PSF applied after propagation; 0 disables.
    pub psf_fwhm_px: f64,
    pub noise: Option<NoiseSpec>,
    pub output: String,
}

impl Default for PropagateConfig {
    fn default() -> Self {
        PropagateConfig {
            version: CONFIG_VERSION,
            input: String::new(),
            input_kind: ImageKind::Intensity,
            material: None,
            coefficient_m2: None,
            distance_m: 0.0,
            variant: VariantName::Continuous,
            incident_intensity: 1.0,
            psf_fwhm_px: 0.0,
            noise: None,
            output: "propagated.pfi".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrieveConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub input: String,
    pub distance_m: f64,
    pub variant: VariantName,
    pub incident_intensity: f64,
    /// Replaces any material-derived coefficient when set.
    pub coefficient_m2: Option<f64>,
    /// Single material, or the embedded material when `matrix` is set.
    pub material: Option<MaterialSpec>,
    /// Surrounding material for two-material retrieval.
    pub matrix: Option<MaterialSpec>,
    /// `thickness` converts with `-ln(I/I_0)/mu` of `material`.
    pub output_kind: ImageKind,
    /// Lower bound applied to the retrieved intensity.
    pub clamp_min: Option<f64>,
    pub output: String,
}

impl Default for RetrieveConfig {
    fn default() -> Self {
        RetrieveConfig {
            version: CONFIG_VERSION,
            input: String::new(),
            distance_m: 0.0,
            variant: VariantName::Continuous,
            incident_intensity: 1.0,
            coefficient_m2: None,
            material: None,
            matrix: None,
            output_kind: ImageKind::Intensity,
            clamp_min: None,
            output: "retrieved.pfi".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SinogramKind {
    /// Flat-field normalised intensity; the log is taken before FBP.
    #[default]
    Intensity,
    /// Line integrals, reconstructed directly.
    Attenuation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    /// Sinogram raster: one row per angle, angles uniform over [0, pi).
    pub input: String,
    pub input_kind: SinogramKind,
    pub incident_intensity: f64,
    /// Row-wise phase retrieval before the log when either is set.
    pub coefficient_m2: Option<f64>,
    pub material: Option<MaterialSpec>,
    pub distance_m: f64,
    pub variant: VariantName,
    pub output: String,
}

impl Default for CtConfig {
    fn default() -> Self {
        CtConfig {
            version: CONFIG_VERSION,
            input: String::new(),
            input_kind: SinogramKind::Intensity,
            incident_intensity: 1.0,
            coefficient_m2: None,
            material: None,
            distance_m: 0.0,
            variant: VariantName::Continuous,
            output: "slice.pfi".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub input_a: String,
    pub input_b: String,
    pub energy_a_kev: f64,
    pub energy_b_kev: f64,
    pub distance_m: f64,
    pub variant: VariantName,
    pub incident_intensity: f64,
    /// Outputs are `<output>_photoelectric.pfi` and `<output>_electron_density.pfi`.
    pub output: String,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            version: CONFIG_VERSION,
            input_a: String::new(),
            input_b: String::new(),
            energy_a_kev: 30.0,
            energy_b_kev: 40.0,
            distance_m: 0.0,
            variant: VariantName::Continuous,
            incident_intensity: 1.0,
            output: "decomposed".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsfConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub input: String,
    /// Edge center `(x, y)` in pixels; the image center when absent.
    pub center_px: Option<[f64; 2]>,
    pub radius_px: f64,
    pub half_width_px: f64,
    pub bin_width_px: f64,
    pub arc_deg: [f64; 2],
    /// Fit parameters as JSON.
    pub output: String,
    /// Optional CSV of the binned ESF and its derivative.
    pub profile_output: Option<String>,
}

impl Default for LsfConfig {
    fn default() -> Self {
        LsfConfig {
            version: CONFIG_VERSION,
            input: String::new(),
            center_px: None,
            radius_px: 0.0,
            half_width_px: 8.0,
            bin_width_px: 1.0,
            arc_deg: [0.0, 360.0],
            output: "lsf.json".into(),
            profile_output: None,
        }
    }
}

versioned!(
    TransferConfig,
    ResolutionSweepConfig,
    RebinSweepConfig,
    PhantomConfig,
    PropagateConfig,
    RetrieveConfig,
    CtConfig,
    DecomposeConfig,
    LsfConfig
);

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_parse_json_and_fall_back_to_strings() {
        let mut v = json!({});
        apply_override(&mut v, "grid=64").unwrap();
        apply_override(&mut v, "output=out/dir").unwrap();
        apply_override(&mut v, "sweep=[1, 2]").unwrap();
        apply_override(&mut v, "material.energy_kev=30").unwrap();
        assert_eq!(
            v,
            json!({"grid": 64, "output": "out/dir", "sweep": [1, 2], "material": {"energy_kev": 30}})
        );
        assert!(apply_override(&mut v, "grid").is_err());
        assert!(apply_override(&mut v, "grid.x=1").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = load::<TransferConfig>(None, &["pixel_size=1".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = load::<ResolutionSweepConfig>(None, &["material.density=1".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn defaults_fill_missing_keys() {
        let cfg: TransferConfig = load(None, &["grid=32".into()]).unwrap();
        assert_eq!(cfg.grid, 32);
        assert_eq!(cfg.sweep.len(), 5);
        assert_eq!(cfg.version, CONFIG_VERSION);
    }

    #[test]
    fn wrong_version_is_rejected() {
        assert!(load::<LsfConfig>(None, &["version=7".into()]).is_err());
    }

    #[test]
    fn material_overrides_replace_table_values() {
        let mut spec = MaterialSpec::new("water", 24.0);
        let base = spec.resolve().unwrap();
        spec.delta = Some(2.0 * base.delta);
        let r = spec.resolve().unwrap();
        assert_eq!(r.delta, 2.0 * base.delta);
        assert_eq!(r.mu_per_m, base.mu_per_m);
        assert!(r.provenance.contains("overridden"));
        assert!(MaterialSpec::new("unobtainium", 24.0).resolve().is_err());
        let custom = MaterialSpec {
            delta: Some(1e-7),
            mu_per_m: Some(10.0),
            ..MaterialSpec::new("unobtainium", 24.0)
        };
        assert_eq!(custom.resolve().unwrap().provenance, "user supplied");
    }
}
