//! Wavelength-dependent refractive indices.
//!
//! Models are loaded from a TOML database (see `data/materials.toml`). Each
//! record is either a Sellmeier fit or a constant index and carries the
//! wavelength window it may be evaluated in.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

const BUILTIN_DATABASE: &str = include_str!("../data/materials.toml");

/// The three emission bands studied, in nm.
pub const BANDS_NM: [(f64, f64); 3] = [(640.0, 800.0), (1050.0, 1150.0), (1500.0, 1600.0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DispersionKind {
    Sellmeier,
    Constant,
}

/// One `B λ² / (λ² − C)` term, `C` in µm².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellmeierTerm {
    pub b: f64,
    pub c_um2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Dispersion {
    Sellmeier(Vec<SellmeierTerm>),
    Constant(f64),
}

/// Refractive-index model of a single isotropic, lossless material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaterialRecord", into = "MaterialRecord")]
pub struct MaterialModel {
    name: String,
    dispersion: Dispersion,
    valid_range_nm: (f64, f64),
    loss_note: Option<String>,
}

/// On-disk form of a [`MaterialModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialRecord {
    pub name: String,
    pub kind: DispersionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<f64>,
    pub valid_range_nm: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_note: Option<String>,
}

impl TryFrom<MaterialRecord> for MaterialModel {
    type Error = Error;

    fn try_from(rec: MaterialRecord) -> Result<Self> {
        let bad = |reason: &str| Error::Material {
            name: rec.name.clone(),
            reason: reason.to_string(),
        };
        let dispersion = match rec.kind {
            DispersionKind::Sellmeier => {
                if rec.index.is_some() {
                    return Err(bad("`index` is only allowed for constant materials"));
                }
                let coeffs = rec
                    .coefficients
                    .as_ref()
                    .ok_or_else(|| bad("sellmeier material needs `coefficients`"))?;
                if coeffs.is_empty() {
                    return Err(bad("empty coefficient list"));
                }
                Dispersion::Sellmeier(
                    coeffs
                        .iter()
                        .map(|&[b, c_um2]| SellmeierTerm { b, c_um2 })
                        .collect(),
                )
            }
            DispersionKind::Constant => {
                if rec.coefficients.is_some() {
                    return Err(bad("`coefficients` is only allowed for sellmeier materials"));
                }
                Dispersion::Constant(
                    rec.index
                        .ok_or_else(|| bad("constant material needs `index`"))?,
                )
            }
        };
        MaterialModel::new(
            rec.name,
            dispersion,
            (rec.valid_range_nm[0], rec.valid_range_nm[1]),
            rec.loss_note,
        )
    }
}

impl From<MaterialModel> for MaterialRecord {
    fn from(m: MaterialModel) -> Self {
        let (kind, coefficients, index) = match m.dispersion {
            Dispersion::Sellmeier(terms) => (
                DispersionKind::Sellmeier,
                Some(terms.iter().map(|t| [t.b, t.c_um2]).collect()),
                None,
            ),
            Dispersion::Constant(n) => (DispersionKind::Constant, None, Some(n)),
        };
        MaterialRecord {
            name: m.name,
            kind,
            coefficients,
            index,
            valid_range_nm: [m.valid_range_nm.0, m.valid_range_nm.1],
            loss_note: m.loss_note,
        }
    }
}

impl MaterialModel {
    /// Builds and validates a model: the window must be positive and ordered,
    /// no Sellmeier pole may fall inside it, and `n ≥ 1` must hold across it.
    pub fn new(
        name: impl Into<String>,
        dispersion: Dispersion,
        valid_range_nm: (f64, f64),
        loss_note: Option<String>,
    ) -> Result<Self> {
        let name = name.into();
        let bad = |reason: String| Error::Material {
            name: name.clone(),
            reason,
        };
        let (lo, hi) = valid_range_nm;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
            return Err(bad(format!("invalid valid_range_nm [{lo}, {hi}]")));
        }
        match &dispersion {
            Dispersion::Constant(n) => {
                if !(n.is_finite() && *n >= 1.0) {
                    return Err(bad(format!("constant index {n} must be finite and >= 1")));
                }
            }
            Dispersion::Sellmeier(terms) => {
                let (lo2, hi2) = ((lo * 1e-3).powi(2), (hi * 1e-3).powi(2));
                for t in terms {
                    if !(t.b.is_finite() && t.c_um2.is_finite()) {
                        return Err(bad("non-finite Sellmeier coefficient".into()));
                    }
                    if t.c_um2 >= lo2 && t.c_um2 <= hi2 {
                        return Err(bad(format!(
                            "Sellmeier pole at {:.1} nm lies inside the valid range",
                            t.c_um2.sqrt() * 1e3
                        )));
                    }
                }
            }
        }
        let model = MaterialModel {
            name,
            dispersion,
            valid_range_nm,
            loss_note,
        };
        // Dense scan of the window; poles are excluded above so n² is smooth.
        const SCAN: usize = 512;
        for k in 0..=SCAN {
            let lam = lo + (hi - lo) * k as f64 / SCAN as f64;
            let eps = model.eps_unchecked(lam);
            if !(eps.is_finite() && eps >= 1.0) {
                return Err(Error::Material {
                    name: model.name,
                    reason: format!("n^2 = {eps} < 1 at {lam:.1} nm"),
                });
            }
        }
        Ok(model)
    }

    pub fn constant(name: impl Into<String>, index: f64) -> Result<Self> {
        Self::new(name, Dispersion::Constant(index), (1.0, 1.0e6), None)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dispersion(&self) -> &Dispersion {
        &self.dispersion
    }

    pub fn valid_range_nm(&self) -> (f64, f64) {
        self.valid_range_nm
    }

    pub fn loss_note(&self) -> Option<&str> {
        self.loss_note.as_deref()
    }

    pub fn contains(&self, lambda_nm: f64) -> bool {
        lambda_nm >= self.valid_range_nm.0 && lambda_nm <= self.valid_range_nm.1
    }

    fn check_range(&self, lambda_nm: f64) -> Result<()> {
        if self.contains(lambda_nm) {
            Ok(())
        } else {
            Err(Error::WavelengthRange {
                material: self.name.clone(),
                lambda_nm,
                min_nm: self.valid_range_nm.0,
                max_nm: self.valid_range_nm.1,
            })
        }
    }

    fn eps_unchecked(&self, lambda_nm: f64) -> f64 {
        self.eps_generic(lambda_nm)
    }

    fn eps_generic<T: Real>(&self, lambda_nm: T) -> T {
        match &self.dispersion {
            Dispersion::Constant(n) => T::lit(*n) * T::lit(*n),
            Dispersion::Sellmeier(terms) => {
                let l_um = lambda_nm * T::lit(1e-3);
                let l2 = l_um * l_um;
                terms.iter().fold(T::one(), |acc, t| {
                    acc + T::lit(t.b) * l2 / (l2 - T::lit(t.c_um2))
                })
            }
        }
    }

    /// Relative permittivity `ε_r = n²` at `lambda_nm`.
    pub fn permittivity<T: Real>(&self, lambda_nm: T) -> Result<T> {
        self.check_range(lambda_nm.to_f64_lossy())?;
        Ok(self.eps_generic(lambda_nm))
    }

    /// Refractive index at `lambda_nm`.
    pub fn refractive_index<T: Real>(&self, lambda_nm: T) -> Result<T> {
        self.permittivity(lambda_nm).map(|e| e.sqrt())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatabaseFile {
    #[serde(default)]
    material: Vec<MaterialModel>,
}

/// Named collection of material models. Lookup is case-insensitive.
#[derive(Debug, Clone, Default)]
pub struct MaterialDatabase {
    entries: BTreeMap<String, MaterialModel>,
}

impl MaterialDatabase {
    /// The database shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_DATABASE).expect("built-in material database is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: DatabaseFile =
            toml::from_str(text).map_err(|e| Error::MaterialParse(e.to_string()))?;
        let mut db = MaterialDatabase::default();
        for m in file.material {
            let key = m.name.to_ascii_lowercase();
            if db.entries.contains_key(&key) {
                return Err(Error::MaterialParse(format!("duplicate material `{}`", m.name)));
            }
            db.entries.insert(key, m);
        }
        Ok(db)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, name: &str) -> Result<&MaterialModel> {
        self.entries
            .get(&name.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &MaterialModel> {
        self.entries.values()
    }
}
