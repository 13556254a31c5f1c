//! Run configuration: sectioned TOML, unit-suffixed keys, unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use slotqed::coupling::Axis;
use slotqed::geometry::CrossSection;
use slotqed::linalg::ArnoldiSettings;
use slotqed::materials::MaterialDatabase;
use slotqed::modesolver::SolverSettings;
use slotqed::sweep::{Band, Range};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Option<GeometryConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    pub coupling: Option<CouplingConfig>,
    pub sweep: Option<SweepConfig>,
    pub cqed: Option<CqedConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub material: String,
    pub width_nm: f64,
    pub height_nm: f64,
    pub slot_nm: f64,
    #[serde(default = "sio2")]
    pub slot_material: String,
    #[serde(default = "sio2")]
    pub substrate_material: String,
    #[serde(default = "air")]
    pub cladding_material: String,
    #[serde(default)]
    pub monolayer_offset_nm: f64,
    /// Optional TOML material database replacing the built-in one.
    pub materials_file: Option<String>,
}

fn sio2() -> String {
    "SiO2".into()
}

fn air() -> String {
    "air".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "ten")]
    pub dx_nm: f64,
    #[serde(default = "ten")]
    pub dy_nm: f64,
    /// Absolute padding; overrides `padding_lambda` when set.
    pub padding_nm: Option<f64>,
    #[serde(default = "three_quarters")]
    pub padding_lambda: f64,
    /// Sweep retries with 1.5× padding when a mode leaks to the boundary.
    #[serde(default = "two")]
    pub padding_retries: usize,
}

fn two() -> usize {
    2
}

fn ten() -> f64 {
    10.0
}

fn three_quarters() -> f64 {
    0.75
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            dx_nm: 10.0,
            dy_nm: 10.0,
            padding_nm: None,
            padding_lambda: 0.75,
            padding_retries: 2,
        }
    }
}

impl GridConfig {
    pub fn padding_at(&self, lambda_nm: f64) -> f64 {
        self.padding_nm.unwrap_or(self.padding_lambda * lambda_nm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "lambda_default")]
    pub lambda_nm: f64,
    #[serde(default = "three")]
    pub n_modes: usize,
    pub n_eff_guess: Option<f64>,
    /// Target mode id; the y-polarized slot mode when absent.
    pub target_mode_id: Option<usize>,
    #[serde(default = "tol")]
    pub tolerance: f64,
    #[serde(default = "forty")]
    pub krylov_dim: usize,
    #[serde(default = "forty")]
    pub max_restarts: usize,
    #[serde(default = "boundary")]
    pub boundary_ratio: f64,
    #[serde(default = "half")]
    pub min_padding_lambda: f64,
    #[serde(default = "one")]
    pub group_index_step_nm: f64,
}

fn lambda_default() -> f64 {
    750.0
}

fn three() -> usize {
    3
}

fn tol() -> f64 {
    1e-8
}

fn forty() -> usize {
    40
}

fn boundary() -> f64 {
    1e-3
}

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            lambda_nm: 750.0,
            n_modes: 3,
            n_eff_guess: None,
            target_mode_id: None,
            tolerance: 1e-8,
            krylov_dim: 40,
            max_restarts: 40,
            boundary_ratio: 1e-3,
            min_padding_lambda: 0.5,
            group_index_step_nm: 1.0,
        }
    }
}

impl SolveConfig {
    pub fn solver_settings(&self) -> SolverSettings<f64> {
        SolverSettings {
            arnoldi: ArnoldiSettings {
                krylov_dim: self.krylov_dim,
                max_restarts: self.max_restarts,
                tol: self.tolerance,
            },
            boundary_ratio: self.boundary_ratio,
            min_padding_lambda: self.min_padding_lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    #[serde(default = "all_axes")]
    pub orientations: Vec<Axis>,
    /// Relative displacements `u` along the monolayer; empty skips the sweep.
    #[serde(default)]
    pub displacements: Vec<f64>,
    /// Wavelengths for the orientation table; defaults to `solve.lambda_nm`.
    #[serde(default)]
    pub lambdas_nm: Vec<f64>,
    /// Dipole position for the orientation table.
    #[serde(default)]
    pub position_nm: [f64; 2],
    #[serde(default = "one")]
    pub f_bg: f64,
}

fn all_axes() -> Vec<Axis> {
    Axis::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Rail materials; more than one also writes a comparison table.
    pub materials: Vec<String>,
    /// Built-in band names (`visible`, `o-band`, `telecom`).
    #[serde(default)]
    pub bands: Vec<String>,
    /// Custom band `[min_nm, max_nm]`, used in addition to `bands`.
    pub band_nm: Option<[f64; 2]>,
    #[serde(default = "w_range")]
    pub width_nm: [f64; 3],
    #[serde(default = "h_range")]
    pub height_nm: [f64; 3],
    #[serde(default = "t_range")]
    pub slot_nm: [f64; 3],
    #[serde(default = "yes")]
    pub refine: bool,
    /// Worker threads; `0` uses every core. `--threads` overrides it.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "yes")]
    pub journal: bool,
}

fn w_range() -> [f64; 3] {
    [200.0, 1200.0, 50.0]
}

fn h_range() -> [f64; 3] {
    [150.0, 800.0, 50.0]
}

fn t_range() -> [f64; 3] {
    [20.0, 160.0, 20.0]
}

fn yes() -> bool {
    true
}

impl SweepConfig {
    pub fn band_list(&self) -> Result<Vec<Band<f64>>, ConfigError> {
        let mut out = Vec::new();
        for name in &self.bands {
            out.push(Band::by_name(name).map_err(|e| ConfigError::Invalid(e.to_string()))?);
        }
        if let Some([lo, hi]) = self.band_nm {
            out.push(
                Band::new(format!("{lo}-{hi}nm"), lo, hi).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            );
        }
        if out.is_empty() {
            return Err(ConfigError::Missing("sweep.bands".into()));
        }
        Ok(out)
    }

    pub fn ranges(&self) -> [Range<f64>; 3] {
        let r = |a: [f64; 3]| Range::new(a[0], a[1], a[2]);
        [r(self.width_nm), r(self.height_nm), r(self.slot_nm)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CqedConfig {
    pub fsr_ghz: f64,
    pub lambda0_nm: f64,
    pub q0: f64,
    pub beta: f64,
    pub f_p: f64,
    pub gamma_l_per_s: Option<f64>,
    #[serde(default = "one_emitter")]
    pub n_emitters: u64,
    /// Total emitter decay rate for the regime test; defaults to `F_P·γ_l`.
    pub gamma_total_per_s: Option<f64>,
}

fn one_emitter() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "out_dir")]
    pub directory: String,
    /// Tabular formats to write besides the JSON summary: `csv`.
    #[serde(default = "csv_only")]
    pub formats: Vec<String>,
}

fn out_dir() -> String {
    "slotqed-out".into()
}

fn csv_only() -> Vec<String> {
    vec!["csv".into()]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: out_dir(),
            formats: csv_only(),
        }
    }
}

impl OutputConfig {
    pub fn csv(&self) -> bool {
        self.formats.iter().any(|f| f == "csv")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if !(g.dx_nm > 0.0 && g.dy_nm > 0.0) {
            return Err(ConfigError::Invalid("grid.dx_nm and grid.dy_nm must be positive".into()));
        }
        if let Some(p) = g.padding_nm {
            if !(p > 0.0) {
                return Err(ConfigError::Invalid("grid.padding_nm must be positive".into()));
            }
        }
        if !(self.solve.lambda_nm > 0.0) {
            return Err(ConfigError::Invalid("solve.lambda_nm must be positive".into()));
        }
        if let Some(c) = &self.coupling {
            if !(c.f_bg >= 0.0) {
                return Err(ConfigError::Invalid("coupling.f_bg must be non-negative".into()));
            }
        }
        for f in &self.output.formats {
            if f != "csv" {
                return Err(ConfigError::Invalid(format!("unknown output format `{f}` (supported: csv)")));
            }
        }
        Ok(())
    }

    /// Canonical TOML rendering; re-parses to an equal config.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn require_geometry(&self) -> Result<&GeometryConfig, ConfigError> {
        self.geometry.as_ref().ok_or_else(|| ConfigError::Missing("geometry".into()))
    }

    pub fn material_db(&self) -> Result<MaterialDatabase, ConfigError> {
        match self.geometry.as_ref().and_then(|g| g.materials_file.as_deref()) {
            Some(p) => MaterialDatabase::from_path(Path::new(p)).map_err(|e| ConfigError::Invalid(e.to_string())),
            None => Ok(MaterialDatabase::builtin()),
        }
    }
}

impl GeometryConfig {
    pub fn cross_section(&self, db: &MaterialDatabase) -> Result<CrossSection<f64>, ConfigError> {
        let get = |name: &str| db.get(name).cloned().map_err(|e| ConfigError::Invalid(e.to_string()));
        let cs = CrossSection {
            rail_material: get(&self.material)?,
            width_nm: self.width_nm,
            height_nm: self.height_nm,
            slot_nm: self.slot_nm,
            slot_material: get(&self.slot_material)?,
            substrate_material: get(&self.substrate_material)?,
            cladding_material: get(&self.cladding_material)?,
            monolayer_offset_nm: self.monolayer_offset_nm,
        };
        cs.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cs)
    }
}
