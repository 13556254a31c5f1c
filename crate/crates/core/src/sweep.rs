//! Geometry optimization of the slot-centre `ŷ` dipole β and per-material
//! band tables.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{coupling_with, Axis, CouplingModel, DipoleSpec};
use crate::error::{Error, Result};
use crate::geometry::{rasterize, CrossSection, Grid2D};
use crate::materials::MaterialDatabase;
use crate::modesolver::{attach_group_indices, find_slot_mode, wavenumber, SolveRequest, SolverSettings};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band<T> {
    pub name: String,
    pub lambda_min_nm: T,
    pub lambda_max_nm: T,
    pub lambda_samples_nm: Vec<T>,
}

impl<T: Real> Band<T> {
    /// Band sampled at its endpoints and midpoint.
    pub fn new(name: impl Into<String>, lambda_min_nm: T, lambda_max_nm: T) -> Result<Self> {
        if !(lambda_min_nm > T::zero() && lambda_min_nm < lambda_max_nm) {
            return Err(Error::Config(format!(
                "band limits must satisfy 0 < min < max, got {lambda_min_nm}-{lambda_max_nm} nm"
            )));
        }
        let mid = (lambda_min_nm + lambda_max_nm) / T::lit(2.0);
        Ok(Band {
            name: name.into(),
            lambda_min_nm,
            lambda_max_nm,
            lambda_samples_nm: vec![lambda_min_nm, mid, lambda_max_nm],
        })
    }

    pub fn builtin() -> [Band<T>; 3] {
        [
            Band::new("visible", T::lit(640.0), T::lit(800.0)).unwrap(),
            Band::new("o-band", T::lit(1050.0), T::lit(1150.0)).unwrap(),
            Band::new("telecom", T::lit(1500.0), T::lit(1600.0)).unwrap(),
        ]
    }

    pub fn by_name(name: &str) -> Result<Band<T>> {
        Self::builtin()
            .into_iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::Config(format!("unknown band `{name}` (built-in: visible, o-band, telecom)")))
    }

    pub fn center_nm(&self) -> T {
        (self.lambda_min_nm + self.lambda_max_nm) / T::lit(2.0)
    }
}

/// Inclusive arithmetic range `min, min + step, …, ≤ max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range<T> {
    pub min: T,
    pub max: T,
    pub step: T,
}

impl<T: Real> Range<T> {
    pub fn new(min: T, max: T, step: T) -> Self {
        Range { min, max, step }
    }

    pub fn single(v: T) -> Self {
        Range { min: v, max: v, step: T::one() }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.min > T::zero() && self.max >= self.min && self.step > T::zero()) {
            return Err(Error::Config(format!(
                "{name} range needs 0 < min <= max and step > 0, got ({}, {}, {})",
                self.min, self.max, self.step
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<T> {
        let n = ((self.max - self.min) / self.step + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
        (0..=n).map(|k| self.min + T::from_usize_lossy(k) * self.step).collect()
    }
}

/// Numerical settings of one point evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings<T> {
    pub dx_nm: T,
    pub dy_nm: T,
    /// Window padding as a multiple of the wavelength.
    pub padding_lambda: T,
    /// Times a point is retried with 1.5× the padding when the slot mode
    /// fails the boundary check.
    pub padding_retries: usize,
    pub group_index_step_nm: T,
    pub solver: SolverSettings<T>,
    pub model: CouplingModel<T>,
}

impl<T: Real> Default for EvalSettings<T> {
    fn default() -> Self {
        EvalSettings {
            dx_nm: T::lit(10.0),
            dy_nm: T::lit(10.0),
            padding_lambda: T::lit(0.75),
            padding_retries: 2,
            group_index_step_nm: T::one(),
            solver: SolverSettings::default(),
            model: CouplingModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec<T> {
    pub material: String,
    pub band: Band<T>,
    pub width_nm: Range<T>,
    pub height_nm: Range<T>,
    pub slot_nm: Range<T>,
    /// Coordinate-descent pass at half step after the grid search.
    pub refine: bool,
    pub settings: EvalSettings<T>,
}

impl<T: Real> SweepSpec<T> {
    pub fn new(material: impl Into<String>, band: Band<T>) -> Self {
        SweepSpec {
            material: material.into(),
            band,
            width_nm: Range::new(T::lit(200.0), T::lit(1200.0), T::lit(50.0)),
            height_nm: Range::new(T::lit(150.0), T::lit(800.0), T::lit(50.0)),
            slot_nm: Range::new(T::lit(20.0), T::lit(160.0), T::lit(20.0)),
            refine: true,
            settings: EvalSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.width_nm.validate("width")?;
        self.height_nm.validate("height")?;
        self.slot_nm.validate("slot")?;
        Ok(())
    }

    /// Canonical JSON of the spec; the first line of a sweep journal.
    pub fn fingerprint(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Geometry `(w, h, t_slot)` in nm.
pub type Geometry<T> = (T, T, T);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord<T> {
    pub index: usize,
    pub width_nm: T,
    pub height_nm: T,
    pub slot_nm: T,
    pub beta: Option<T>,
    pub f_wg: Option<T>,
    pub f_p: Option<T>,
    pub n_eff: Option<T>,
    pub n_g: Option<T>,
    pub mode_id: Option<usize>,
    /// Padding of the window that produced the result.
    pub padding_nm: Option<T>,
    pub error: Option<String>,
}

impl<T: Real> PointRecord<T> {
    pub fn geometry(&self) -> Geometry<T> {
        (self.width_nm, self.height_nm, self.slot_nm)
    }

    /// Objective; failed points score `−∞`.
    pub fn score(&self) -> T {
        self.beta.unwrap_or(T::neg_infinity())
    }
}

/// True when `a` ranks above `b`: higher β, ties to the lexicographically
/// smaller geometry.
fn better<T: Real>(a: &PointRecord<T>, b: &PointRecord<T>) -> bool {
    let (sa, sb) = (a.score(), b.score());
    if sa != sb {
        return sa > sb;
    }
    let (ga, gb) = (a.geometry(), b.geometry());
    (ga.0, ga.1, ga.2).partial_cmp(&(gb.0, gb.1, gb.2)) == Some(std::cmp::Ordering::Less)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult<T> {
    pub material: String,
    pub band: String,
    pub lambda_nm: T,
    pub best: PointRecord<T>,
    /// Every evaluated point ordered by index; grid points come first.
    pub points: Vec<PointRecord<T>>,
    pub settings: EvalSettings<T>,
    pub loss_note: Option<String>,
}

impl<T: Real> SweepResult<T> {
    pub fn best_beta(&self) -> T {
        self.best.score()
    }
}

/// Builds the slot-waveguide cross-section used by sweeps.
pub fn cross_section<T: Real>(db: &MaterialDatabase, material: &str, g: Geometry<T>) -> Result<CrossSection<T>> {
    CrossSection::new(db, material, g.0, g.1, g.2)
}

/// Evaluates β, F_wg and F_P of the slot-centre `ŷ` dipole for the
/// y-polarized slot mode of `cs` at `lambda_nm`.
pub fn evaluate_cross_section<T: Real>(
    cs: &CrossSection<T>,
    lambda_nm: T,
    settings: &EvalSettings<T>,
) -> Result<crate::coupling::CouplingResult<T>> {
    Ok(evaluate_mode(cs, lambda_nm, settings)?.1)
}

/// Solves the slot mode of `cs` and evaluates the slot-centre `ŷ` dipole.
pub fn evaluate_mode<T: Real>(
    cs: &CrossSection<T>,
    lambda_nm: T,
    settings: &EvalSettings<T>,
) -> Result<(crate::modesolver::Mode<T>, crate::coupling::CouplingResult<T>)> {
    let mut padding = settings.padding_lambda * lambda_nm;
    let mut attempt = 0;
    loop {
        match evaluate_with_padding(cs, lambda_nm, padding, settings) {
            Err(e @ Error::InsufficientPadding { ratio, limit, n_eff }) if attempt < settings.padding_retries => {
                attempt += 1;
                let next = retry_padding(cs, lambda_nm, padding, ratio, limit, n_eff)?
                    .min(T::lit(MAX_RETRY_PADDING_LAMBDA) * lambda_nm);
                if !(next > padding) {
                    return Err(e);
                }
                padding = next;
            }
            other => return other,
        }
    }
}

/// Upper bound on the padding of a retry window, in wavelengths.
pub const MAX_RETRY_PADDING_LAMBDA: f64 = 2.0;

/// Padding for a retry: extends the window by the distance over which the
/// evanescent tail `exp(−κd)`, `κ = k₀√(n_eff² − n_bg²)`, drops from `ratio`
/// to `limit`, plus 15%; never less than 1.5× the failed padding.
fn retry_padding<T: Real>(cs: &CrossSection<T>, lambda_nm: T, padding: T, ratio: f64, limit: f64, n_eff: f64) -> Result<T> {
    let n_bg = cs
        .substrate_material
        .refractive_index(lambda_nm)?
        .max(cs.cladding_material.refractive_index(lambda_nm)?);
    let n_eff = T::lit(n_eff);
    let floor = padding * T::lit(1.5);
    if !(n_eff > n_bg) || !(ratio > limit) {
        return Ok(floor);
    }
    let kappa = wavenumber(lambda_nm) * (n_eff * n_eff - n_bg * n_bg).sqrt();
    let extra = T::lit(1.15 * (ratio / limit).ln()) / kappa;
    Ok((padding + extra).max(floor))
}

fn evaluate_with_padding<T: Real>(
    cs: &CrossSection<T>,
    lambda_nm: T,
    padding: T,
    settings: &EvalSettings<T>,
) -> Result<(crate::modesolver::Mode<T>, crate::coupling::CouplingResult<T>)> {
    let grid = Grid2D::around(cs, settings.dx_nm, settings.dy_nm, padding)?;
    let map = rasterize(cs, &grid, lambda_nm)?;
    let mut req = SolveRequest::new(map, 3);
    req.settings = settings.solver;
    let mode = find_slot_mode(&req)?;
    let mut modes = vec![mode];
    attach_group_indices(&req, &mut modes, settings.group_index_step_nm)?;
    let mode = modes.pop().expect("one mode");
    let pos = (T::zero(), cs.monolayer_offset_nm);
    let res = coupling_with(&mode, &DipoleSpec::along(pos, Axis::Y, lambda_nm), &settings.model)?;
    Ok((mode, res))
}

fn evaluate_point<T: Real>(
    db: &MaterialDatabase,
    spec: &SweepSpec<T>,
    index: usize,
    g: Geometry<T>,
) -> PointRecord<T> {
    let mut rec = PointRecord {
        index,
        width_nm: g.0,
        height_nm: g.1,
        slot_nm: g.2,
        beta: None,
        f_wg: None,
        f_p: None,
        n_eff: None,
        n_g: None,
        mode_id: None,
        padding_nm: None,
        error: None,
    };
    let out = cross_section(db, &spec.material, g)
        .and_then(|cs| evaluate_mode(&cs, spec.band.center_nm(), &spec.settings));
    match out {
        Ok((mode, c)) => {
            rec.beta = Some(c.beta);
            rec.f_wg = Some(c.f_wg);
            rec.f_p = Some(c.f_p);
            rec.n_eff = Some(mode.n_eff);
            rec.n_g = mode.n_g;
            rec.mode_id = Some(c.mode_id);
            rec.padding_nm = Some(mode.grid().padding_nm);
        }
        Err(e) => {
            log::warn!("sweep point {index} ({}, {}, {}) failed: {e}", g.0, g.1, g.2);
            rec.error = Some(e.to_string());
        }
    }
    rec
}

/// Append-only progress log: a header line with the spec fingerprint, then
/// one JSON point record per line.
struct Journal<T> {
    file: Option<Mutex<File>>,
    done: BTreeMap<usize, PointRecord<T>>,
}

impl<T: Real> Journal<T> {
    fn open(path: Option<&Path>, fingerprint: &str) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Journal {
                file: None,
                done: BTreeMap::new(),
            });
        };
        let mut done = BTreeMap::new();
        let mut fresh = true;
        if path.exists() {
            let mut lines = BufReader::new(File::open(path)?).lines();
            if let Some(header) = lines.next().transpose()? {
                if header == fingerprint {
                    fresh = false;
                    for line in lines {
                        let line = line?;
                        // A torn final line from an interrupted run is dropped.
                        if let Ok(rec) = serde_json::from_str::<PointRecord<T>>(&line) {
                            done.insert(rec.index, rec);
                        }
                    }
                } else {
                    log::warn!("journal {} belongs to a different sweep; starting over", path.display());
                }
            }
        }
        let file = if fresh {
            let mut f = File::create(path)?;
            writeln!(f, "{fingerprint}")?;
            f
        } else {
            OpenOptions::new().append(true).open(path)?
        };
        Ok(Journal {
            file: Some(Mutex::new(file)),
            done,
        })
    }

    fn cached(&self, index: usize, g: Geometry<T>) -> Option<PointRecord<T>> {
        self.done.get(&index).filter(|r| r.geometry() == g).cloned()
    }

    fn record(&self, rec: &PointRecord<T>) -> Result<()> {
        if let Some(f) = &self.file {
            let line = serde_json::to_string(rec)?;
            let mut f = f.lock().unwrap_or_else(|e| e.into_inner());
            writeln!(f, "{line}")?;
            f.flush()?;
        }
        Ok(())
    }
}

/// Options that do not affect the result.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Progress journal; points already recorded for the same spec are reused.
    pub journal: Option<PathBuf>,
}

/// Exhaustive grid search over the spec ranges, then one coordinate-descent
/// pass at half step around the grid optimum (staying inside the ranges).
pub fn optimize_geometry<T: Real>(
    db: &MaterialDatabase,
    spec: &SweepSpec<T>,
    opts: &RunOptions,
) -> Result<SweepResult<T>> {
    spec.validate()?;
    let rail = db.get(&spec.material)?;
    let journal = Journal::open(opts.journal.as_deref(), &spec.fingerprint()?)?;
    let (ws, hs, ts) = (spec.width_nm.values(), spec.height_nm.values(), spec.slot_nm.values());
    let mut grid: Vec<Geometry<T>> = Vec::with_capacity(ws.len() * hs.len() * ts.len());
    for &w in &ws {
        for &h in &hs {
            grid.extend(ts.iter().map(|&t| (w, h, t)));
        }
    }
    let eval = |index: usize, g: Geometry<T>| -> Result<PointRecord<T>> {
        if let Some(rec) = journal.cached(index, g) {
            return Ok(rec);
        }
        let rec = evaluate_point(db, spec, index, g);
        journal.record(&rec)?;
        Ok(rec)
    };
    let mut points: Vec<PointRecord<T>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &g)| eval(i, g))
        .collect::<Result<_>>()?;
    let mut best = pick_best(&points).clone();

    if spec.refine && best.beta.is_some() {
        let ranges = [spec.width_nm, spec.height_nm, spec.slot_nm];
        let mut seen: Vec<Geometry<T>> = grid.clone();
        for axis in 0..3 {
            let r = ranges[axis];
            let half = r.step / T::lit(2.0);
            for sign in [-T::one(), T::one()] {
                let mut g = best.geometry();
                let c = match axis {
                    0 => &mut g.0,
                    1 => &mut g.1,
                    _ => &mut g.2,
                };
                *c += sign * half;
                if *c < r.min || *c > r.max || seen.contains(&g) {
                    continue;
                }
                seen.push(g);
                let rec = eval(points.len(), g)?;
                if better(&rec, &best) {
                    best = rec.clone();
                }
                points.push(rec);
            }
        }
    }

    if best.beta.is_none() {
        let last = points.iter().rev().find_map(|p| p.error.clone()).unwrap_or_default();
        return Err(Error::SweepFailed(last));
    }
    Ok(SweepResult {
        material: spec.material.clone(),
        band: spec.band.name.clone(),
        lambda_nm: spec.band.center_nm(),
        best,
        points,
        settings: spec.settings,
        loss_note: rail.loss_note().map(str::to_owned),
    })
}

fn pick_best<T: Real>(points: &[PointRecord<T>]) -> &PointRecord<T> {
    let mut best = &points[0];
    for p in &points[1..] {
        if better(p, best) {
            best = p;
        }
    }
    best
}

/// One row per evaluated point.
pub fn write_points_csv<T: Real, W: Write>(result: &SweepResult<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "index", "width_nm", "height_nm", "slot_nm", "beta", "F_wg", "F_P", "n_eff", "n_g", "mode_id", "lambda_nm",
        "padding_nm", "error",
    ])?;
    let opt = |v: Option<T>| v.map(|x| x.to_f64_lossy().to_string()).unwrap_or_default();
    for p in &result.points {
        w.write_record([
            p.index.to_string(),
            p.width_nm.to_f64_lossy().to_string(),
            p.height_nm.to_f64_lossy().to_string(),
            p.slot_nm.to_f64_lossy().to_string(),
            opt(p.beta),
            opt(p.f_wg),
            opt(p.f_p),
            opt(p.n_eff),
            opt(p.n_g),
            p.mode_id.map(|m| m.to_string()).unwrap_or_default(),
            result.lambda_nm.to_f64_lossy().to_string(),
            opt(p.padding_nm),
            p.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Optimum and provenance, without the point list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary<T> {
    pub material: String,
    pub band: String,
    pub lambda_nm: T,
    pub best: PointRecord<T>,
    pub evaluated_points: usize,
    pub failed_points: usize,
    pub settings: EvalSettings<T>,
    pub loss_note: Option<String>,
}

impl<T: Real> From<&SweepResult<T>> for SweepSummary<T> {
    fn from(r: &SweepResult<T>) -> Self {
        SweepSummary {
            material: r.material.clone(),
            band: r.band.clone(),
            lambda_nm: r.lambda_nm,
            best: r.best.clone(),
            evaluated_points: r.points.len(),
            failed_points: r.points.iter().filter(|p| p.beta.is_none()).count(),
            settings: r.settings,
            loss_note: r.loss_note.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialRow<T> {
    pub material: String,
    pub band: String,
    pub lambda_nm: T,
    pub best_beta: T,
    pub f_p: T,
    pub f_wg: T,
    pub geometry_nm: Geometry<T>,
    pub loss_note: Option<String>,
}

/// Optimizes every (material, band) cell with `template` ranges and settings.
pub fn material_comparison<T: Real>(
    db: &MaterialDatabase,
    bands: &[Band<T>],
    materials: &[&str],
    template: &SweepSpec<T>,
) -> Result<Vec<MaterialRow<T>>> {
    let mut rows = Vec::new();
    for &m in materials {
        for band in bands {
            let spec = SweepSpec {
                material: m.to_owned(),
                band: band.clone(),
                ..template.clone()
            };
            let r = optimize_geometry(db, &spec, &RunOptions::default())?;
            rows.push(MaterialRow {
                material: m.to_owned(),
                band: band.name.clone(),
                lambda_nm: r.lambda_nm,
                best_beta: r.best_beta(),
                f_p: r.best.f_p.expect("successful optimum"),
                f_wg: r.best.f_wg.expect("successful optimum"),
                geometry_nm: r.best.geometry(),
                loss_note: r.loss_note.clone(),
            });
        }
    }
    Ok(rows)
}
