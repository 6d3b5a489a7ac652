//! File formats: PFI rasters with JSON sidecars, CSV tables and run manifests.
//!
//! A PFI file is a 32-byte ASCII header `PFI1 <width> <height>` padded with
//! spaces and terminated by `\n`, followed by `width * height` row-major
//! little-endian `f32` samples.

use crate::error::{CliError, CliResult};
use phaseret::Image2D;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

pub const PFI_MAGIC: &str = "PFI1";
pub const PFI_HEADER_LEN: usize = 32;
/// Version of the manifest and sidecar layout.
pub const FORMAT_VERSION: u32 = 1;

/// Physics metadata stored next to a PFI file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageMeta {
    pub pixel_size_m: f64,
    #[serde(rename = "energy_eV", default, skip_serializing_if = "Option::is_none")]
    pub energy_ev: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_m: Option<f64>,
    #[serde(default)]
    pub description: String,
}

impl ImageMeta {
    pub fn new(pixel_size_m: f64, description: impl Into<String>) -> Self {
        ImageMeta {
            pixel_size_m,
            energy_ev: None,
            distance_m: None,
            description: description.into(),
        }
    }
}

/// `<stem>.json` beside a `<stem>.pfi`.
pub fn sidecar_path(pfi: &Path) -> PathBuf {
    pfi.with_extension("json")
}

/// `<stem>.manifest.json` beside any output.
pub fn manifest_path(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}

pub fn encode_pfi(width: usize, height: usize, samples: &[f64]) -> CliResult<Vec<u8>> {
    let mut header = format!("{PFI_MAGIC} {width} {height}");
    if header.len() > PFI_HEADER_LEN - 1 {
        return Err(CliError::Format(format!(
            "dimensions {width}x{height} do not fit the header"
        )));
    }
    while header.len() < PFI_HEADER_LEN - 1 {
        header.push(' ');
    }
    header.push('\n');
    let mut out = header.into_bytes();
    out.reserve(4 * samples.len());
    for &v in samples {
        let f = v as f32;
        if !f.is_finite() {
            return Err(CliError::Numerical(format!(
                "sample {v} is not representable as f32"
            )));
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

/// `(width, height, samples)` from PFI bytes.
pub fn decode_pfi(bytes: &[u8]) -> CliResult<(usize, usize, Vec<f64>)> {
    if bytes.len() < PFI_HEADER_LEN || bytes[PFI_HEADER_LEN - 1] != b'\n' {
        return Err(CliError::Format("missing 32-byte PFI header".into()));
    }
    let header = std::str::from_utf8(&bytes[..PFI_HEADER_LEN - 1])
        .map_err(|_| CliError::Format("PFI header is not ASCII".into()))?;
    let mut fields = header.split_ascii_whitespace();
    if fields.next() != Some(PFI_MAGIC) {
        return Err(CliError::Format(format!("bad PFI magic in {header:?}")));
    }
    let mut dim = |name| -> CliResult<usize> {
        fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::Format(format!("bad PFI {name} in {header:?}")))
    };
    let (width, height) = (dim("width")?, dim("height")?);
    let payload = &bytes[PFI_HEADER_LEN..];
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| CliError::Format("PFI dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(CliError::Format(format!(
            "PFI payload has {} bytes, {width}x{height} needs {expected}",
            payload.len()
        )));
    }
    let samples = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok((width, height, samples))
}

/// Writes `<path>` and its metadata sidecar.
pub fn write_pfi(path: &Path, img: &Image2D, meta: &ImageMeta) -> CliResult<()> {
    write_raw_pfi(path, img.width(), img.height(), img.samples(), meta)
}

/// As [`write_pfi`] for raw rasters such as sinograms.
pub fn write_raw_pfi(
    path: &Path,
    width: usize,
    height: usize,
    samples: &[f64],
    meta: &ImageMeta,
) -> CliResult<()> {
    let bytes = encode_pfi(width, height, samples)?;
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
    write_json(&sidecar_path(path), meta)
}

/// Raw raster and its sidecar metadata.
pub fn read_raw_pfi(path: &Path) -> CliResult<(usize, usize, Vec<f64>, ImageMeta)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let (w, h, samples) =
        decode_pfi(&bytes).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    let meta: ImageMeta = read_json(&sidecar_path(path))?;
    Ok((w, h, samples, meta))
}

pub fn read_pfi(path: &Path) -> CliResult<(Image2D, ImageMeta)> {
    let (w, h, samples, meta) = read_raw_pfi(path)?;
    let img = Image2D::new(w, h, meta.pixel_size_m, samples)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    Ok((img, meta))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    ensure_parent(path)?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits round-trip any f64.
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> CliResult<()> {
    ensure_parent(path)?;
    let wrap = |e: csv::Error| CliError::Format(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(row.iter().map(Cell::render)).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub fn digest(path: &Path) -> CliResult<FileDigest> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Provenance record written beside every command output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub command: String,
    /// Fully resolved configuration.
    pub config: serde_json::Value,
    /// Quantities derived from the configuration (materials, coefficients).
    pub derived: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Checksums the listed files and writes the manifest to `path`.
pub fn write_manifest(
    path: &Path,
    command: &str,
    config: serde_json::Value,
    derived: serde_json::Value,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
) -> CliResult<Manifest> {
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        config,
        derived,
        inputs: inputs.iter().map(|p| digest(p)).collect::<CliResult<_>>()?,
        outputs: outputs
            .iter()
            .map(|p| digest(p))
            .collect::<CliResult<_>>()?,
    };
    write_json(path, &manifest)?;
    Ok(manifest)
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
        }
        _ => Ok(()),
    }
}
