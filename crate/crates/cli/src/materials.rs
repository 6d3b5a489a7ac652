//! Built-in optical constants for water, PMMA and aluminium.
//!
//! `delta` follows from the electron density (mass density and mean Z/A);
//! `mu` from NIST XCOM/FFAST mass attenuation coefficients (total, with
//! coherent scattering). Energies between tabulated nodes use log-log
//! interpolation of the mass attenuation coefficient.

use phaseret::retrieval::Material;
use serde::{Deserialize, Serialize};

struct Compound {
    name: &'static str,
    /// g/cm^3
    density: f64,
    /// mol/g
    z_over_a: f64,
    /// (keV, cm^2/g)
    attenuation: &'static [(f64, f64)],
    source: &'static str,
}

const COMPOUNDS: &[Compound] = &[
    Compound {
        name: "water",
        density: 0.998,
        z_over_a: 0.55508,
        attenuation: &[
            (15.0, 1.673),
            (20.0, 0.8096),
            (30.0, 0.3756),
            (40.0, 0.2683),
            (50.0, 0.2269),
        ],
        source: "NIST X-ray mass attenuation table, liquid water; density 0.998 g/cm^3",
    },
    Compound {
        name: "pmma",
        density: 1.19,
        z_over_a: 0.53937,
        attenuation: &[
            (10.0, 3.357),
            (15.0, 1.101),
            (20.0, 0.5714),
            (30.0, 0.3032),
            (40.0, 0.2350),
            (50.0, 0.2074),
        ],
        source: "NIST X-ray mass attenuation table, polymethyl methacrylate; density 1.19 g/cm^3",
    },
    Compound {
        name: "aluminium",
        density: 2.699,
        z_over_a: 0.48181,
        attenuation: &[
            (10.0, 26.23),
            (15.0, 7.955),
            (20.0, 3.441),
            (30.0, 1.128),
            (40.0, 0.5685),
            (50.0, 0.3681),
        ],
        source: "NIST X-ray mass attenuation table, Z=13; density 2.699 g/cm^3",
    },
];

/// Energies (keV) the built-in table covers.
pub const TABLE_ENERGIES_KEV: [f64; 4] = [24.0, 26.0, 30.0, 40.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialEntry {
    pub name: String,
    pub energy_kev: f64,
    pub delta: f64,
    pub beta: f64,
    pub mu_per_m: f64,
    pub provenance: String,
}

impl MaterialEntry {
    pub fn material(&self) -> anyhow::Result<Material> {
        Ok(Material::new(
            self.delta,
            self.beta,
            self.mu_per_m,
            self.energy_kev * 1e3,
        )?)
    }
}

fn canonical(name: &str) -> String {
    match name.to_ascii_lowercase().as_str() {
        "aluminum" | "al" => "aluminium".into(),
        other => other.into(),
    }
}

fn interpolate(table: &[(f64, f64)], energy_kev: f64) -> Option<(f64, String)> {
    if let Some(&(_, v)) = table.iter().find(|(e, _)| *e == energy_kev) {
        return Some((v, "tabulated node".into()));
    }
    let i = table
        .windows(2)
        .position(|p| p[0].0 < energy_kev && energy_kev < p[1].0)?;
    let ((e0, v0), (e1, v1)) = (table[i], table[i + 1]);
    let t = (energy_kev / e0).ln() / (e1 / e0).ln();
    let v = (v0.ln() + t * (v1 / v0).ln()).exp();
    Some((
        v,
        format!("log-log interpolation between {e0} and {e1} keV"),
    ))
}

/// Optical constants for `name` at `energy_kev`, or `None` outside the table.
pub fn lookup(name: &str, energy_kev: f64) -> Option<MaterialEntry> {
    let key = canonical(name);
    let c = COMPOUNDS.iter().find(|c| c.name == key)?;
    let (mass_att, how) = interpolate(c.attenuation, energy_kev)?;
    let m = Material::from_composition(c.density, c.z_over_a, mass_att, energy_kev * 1e3).ok()?;
    Some(MaterialEntry {
        name: key,
        energy_kev,
        delta: m.delta,
        beta: m.beta,
        mu_per_m: m.mu,
        provenance: format!(
            "{}; mu/rho = {mass_att:.4} cm^2/g ({how}); delta from electron density with Z/A = {}",
            c.source, c.z_over_a
        ),
    })
}

/// The full built-in table at [`TABLE_ENERGIES_KEV`].
pub fn builtin_table() -> Vec<MaterialEntry> {
    COMPOUNDS
        .iter()
        .flat_map(|c| {
            TABLE_ENERGIES_KEV
                .iter()
                .filter_map(move |&e| lookup(c.name, e))
        })
        .collect()
}
