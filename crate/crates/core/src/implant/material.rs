//! Target materials for ion transport: built-in amorphous SiO2 and diamond,
//! extensible through a JSON database.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const AVOGADRO: f64 = 6.022_140_76e23;

/// One atomic species of a target material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSpecies {
    /// Atomic number.
    pub z: f64,
    /// Atomic mass, u.
    pub mass_amu: f64,
    /// Stoichiometric fraction (fractions of a material sum to 1).
    pub fraction: f64,
}

/// A homogeneous amorphous layer. `thickness_nm = None` marks the
/// semi-infinite substrate (only valid for the last layer of a stack).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialLayer {
    pub label: String,
    /// Mass density, g/cm^3.
    pub density_g_cm3: f64,
    pub atoms: Vec<AtomSpecies>,
    pub thickness_nm: Option<f64>,
}

impl MaterialLayer {
    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "material {} has no atomic species",
                self.label
            )));
        }
        if !(self.density_g_cm3 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "material {} density must be > 0, got {}",
                self.label, self.density_g_cm3
            )));
        }
        let total: f64 = self.atoms.iter().map(|a| a.fraction).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "material {} stoichiometric fractions sum to {total}, expected 1",
                self.label
            )));
        }
        for a in &self.atoms {
            if !(a.z > 0.0 && a.mass_amu > 0.0 && a.fraction > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "material {} has a non-positive species entry",
                    self.label
                )));
            }
        }
        if let Some(t) = self.thickness_nm {
            if !(t >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "material {} thickness must be >= 0, got {t}",
                    self.label
                )));
            }
        }
        Ok(())
    }

    /// Mean atomic mass, u.
    pub fn mean_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.fraction * a.mass_amu).sum()
    }

    /// Total atomic number density, nm^-3.
    pub fn number_density_nm3(&self) -> f64 {
        // atoms/cm^3 = rho N_A / mean mass; 1 cm^3 = 1e21 nm^3.
        self.density_g_cm3 * AVOGADRO / self.mean_mass() * 1e-21
    }

    pub fn with_thickness(mut self, thickness_nm: Option<f64>) -> Self {
        self.thickness_nm = thickness_nm;
        self
    }
}

/// Amorphous SiO2 at the evaporated-film default of 2.2 g/cm^3.
pub fn sio2(density_g_cm3: f64) -> MaterialLayer {
    MaterialLayer {
        label: "sio2".to_string(),
        density_g_cm3,
        atoms: vec![
            AtomSpecies { z: 14.0, mass_amu: 28.0855, fraction: 1.0 / 3.0 },
            AtomSpecies { z: 8.0, mass_amu: 15.999, fraction: 2.0 / 3.0 },
        ],
        thickness_nm: None,
    }
}

pub const SIO2_DEFAULT_DENSITY: f64 = 2.2;

/// Diamond at 3.52 g/cm^3.
pub fn diamond() -> MaterialLayer {
    MaterialLayer {
        label: "diamond".to_string(),
        density_g_cm3: 3.52,
        atoms: vec![AtomSpecies { z: 6.0, mass_amu: 12.011, fraction: 1.0 }],
        thickness_nm: None,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MaterialDbFile {
    materials: Vec<MaterialLayer>,
}

/// Material database: built-ins plus user entries (matching labels override).
#[derive(Debug, Clone)]
pub struct MaterialDb {
    materials: Vec<MaterialLayer>,
}

impl Default for MaterialDb {
    fn default() -> Self {
        MaterialDb { materials: vec![sio2(SIO2_DEFAULT_DENSITY), diamond()] }
    }
}

impl MaterialDb {
    /// Extend the built-ins with entries from a JSON file:
    /// `{"materials": [{"label": ..., "density_g_cm3": ..., "atoms": [...]}]}`.
    pub fn with_file(path: &Path) -> Result<Self> {
        let mut db = MaterialDb::default();
        let text = std::fs::read_to_string(path)?;
        let file: MaterialDbFile = serde_json::from_str(&text)?;
        for m in file.materials {
            m.validate()?;
            db.materials.retain(|existing| existing.label != m.label);
            db.materials.push(m);
        }
        Ok(db)
    }

    pub fn get(&self, label: &str) -> Result<MaterialLayer> {
        self.materials
            .iter()
            .find(|m| m.label == label)
            .cloned()
            .ok_or_else(|| Error::InvalidParameter(format!("unknown material `{label}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn builtin_number_densities() {
        // SiO2 at 2.2 g/cm^3: 6.61e22 atoms/cm^3 = 66.1 nm^-3.
        assert_relative_eq!(
            sio2(SIO2_DEFAULT_DENSITY).number_density_nm3(),
            66.15,
            max_relative = 1e-3
        );
        // Diamond: 1.765e23 atoms/cm^3.
        assert_relative_eq!(diamond().number_density_nm3(), 176.5, max_relative = 1e-3);
    }

    #[test]
    fn validation_catches_bad_stoichiometry() {
        let mut m = sio2(SIO2_DEFAULT_DENSITY);
        assert!(m.validate().is_ok());
        m.atoms[0].fraction = 0.5;
        assert!(m.validate().is_err());
    }

    #[test]
    fn db_file_overrides_builtin() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("materials.json");
        std::fs::write(
            &path,
            r#"{"materials":[{"label":"sio2","density_g_cm3":2.0,
                "atoms":[{"z":14,"mass_amu":28.0855,"fraction":0.3333333333},
                         {"z":8,"mass_amu":15.999,"fraction":0.6666666667}],
                "thickness_nm":null}]}"#,
        )
        .unwrap();
        let db = MaterialDb::with_file(&path).unwrap();
        assert_relative_eq!(db.get("sio2").unwrap().density_g_cm3, 2.0);
        assert!(db.get("diamond").is_ok());
        assert!(db.get("si3n4").is_err());
    }
}
