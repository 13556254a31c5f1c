//! Subcommand implementations.

use std::path::PathBuf;

use anyhow::anyhow;
use serde::Serialize;

use slotqed::coupling::{
    displacement_sweep, orientation_table, write_displacement_csv, CouplingModel, CouplingResult,
};
use slotqed::cqed::{self, CavityFigures, EmitterParams, ResonatorSpec, FSR_RATE_FACTOR};
use slotqed::fielddump;
use slotqed::geometry::{rasterize, CrossSection, Grid2D};
use slotqed::modesolver::{
    attach_group_indices, find_slot_mode, slot_enhancement, solve_modes, Mode, SolveRequest,
};
use slotqed::sweep::{
    optimize_geometry, write_points_csv, EvalSettings, MaterialRow, RunOptions, SweepSpec, SweepSummary,
};
use slotqed::Error;

use crate::config::{ConfigError, RunConfig};
use crate::output::{Meta, OutDir};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_COUPLING: u8 = 4;
pub const EXIT_SWEEP: u8 = 5;
pub const EXIT_CQED: u8 = 6;
pub const EXIT_IO: u8 = 7;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(error: anyhow::Error) -> Self {
        Failure {
            code: EXIT_CONFIG,
            error,
        }
    }

    fn io(error: anyhow::Error) -> Self {
        Failure { code: EXIT_IO, error }
    }

    /// Library errors: input problems map to the config code, the rest to
    /// the module's code.
    fn lib(module: u8, e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::Geometry(_)
            | Error::Domain(_)
            | Error::UnknownMaterial(_)
            | Error::WavelengthRange { .. }
            | Error::MissingInput(_)
            | Error::Material { .. }
            | Error::MaterialParse(_) => EXIT_CONFIG,
            Error::Io(_) => EXIT_IO,
            _ => module,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e.into())
    }
}

pub struct Global {
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub dump_fields: bool,
}

fn out_dir(g: &Global) -> Result<OutDir, Failure> {
    OutDir::create(&g.out).map_err(Failure::io)
}

fn request(cfg: &RunConfig, cs: &CrossSection<f64>, lambda_nm: f64) -> Result<SolveRequest<f64>, Failure> {
    let grid = Grid2D::around(cs, cfg.grid.dx_nm, cfg.grid.dy_nm, cfg.grid.padding_at(lambda_nm))
        .map_err(|e| Failure::lib(EXIT_SOLVER, e))?;
    let map = rasterize(cs, &grid, lambda_nm).map_err(|e| Failure::lib(EXIT_SOLVER, e))?;
    let mut req = SolveRequest::new(map, cfg.solve.n_modes);
    req.n_eff_guess = cfg.solve.n_eff_guess;
    req.settings = cfg.solve.solver_settings();
    Ok(req)
}

/// Target mode (configured id, else the slot mode) with its group index.
fn target_mode(cfg: &RunConfig, req: &SolveRequest<f64>) -> Result<Mode<f64>, Failure> {
    let solver = |e| Failure::lib(EXIT_SOLVER, e);
    let mode = match cfg.solve.target_mode_id {
        Some(id) => solve_modes(req)
            .map_err(solver)?
            .into_iter()
            .nth(id)
            .ok_or_else(|| {
                Failure::lib(
                    EXIT_SOLVER,
                    Error::NoGuidedMode {
                        lambda_nm: req.lambda_nm(),
                    },
                )
            })?,
        None => find_slot_mode(req).map_err(solver)?,
    };
    let mut one = vec![mode];
    attach_group_indices(req, &mut one, cfg.solve.group_index_step_nm).map_err(solver)?;
    Ok(one.pop().expect("one mode"))
}

#[derive(Serialize)]
struct ModeSummary {
    id: usize,
    n_eff: f64,
    n_g: Option<f64>,
    pol_fraction_y: f64,
    gamma_slot: f64,
    power: f64,
    residual: f64,
    slot_enhancement: f64,
}

impl From<&Mode<f64>> for ModeSummary {
    fn from(m: &Mode<f64>) -> Self {
        ModeSummary {
            id: m.id,
            n_eff: m.n_eff,
            n_g: m.n_g,
            pol_fraction_y: m.pol_fraction_y,
            gamma_slot: m.gamma_slot,
            power: m.power,
            residual: m.residual,
            slot_enhancement: slot_enhancement(m),
        }
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    lambda_nm: f64,
    grid: &'a Grid2D<f64>,
    slot_mode_id: Option<usize>,
    modes: Vec<ModeSummary>,
    field_dumps: Vec<String>,
}

pub fn solve(cfg: &RunConfig, g: &Global) -> Result<(), Failure> {
    let db = cfg.material_db()?;
    let cs = cfg.require_geometry()?.cross_section(&db)?;
    let req = request(cfg, &cs, cfg.solve.lambda_nm)?;
    let solver = |e| Failure::lib(EXIT_SOLVER, e);
    let mut modes = solve_modes(&req).map_err(solver)?;
    if let Err(e) = attach_group_indices(&req, &mut modes, cfg.solve.group_index_step_nm) {
        log::warn!("group index for the full mode list failed ({e}); retrying per mode");
        for k in 0..modes.len() {
            let mut one = vec![modes[k].clone()];
            match attach_group_indices(&req, &mut one, cfg.solve.group_index_step_nm) {
                Ok(()) => modes[k].n_g = one[0].n_g,
                Err(e) => log::warn!("mode {k}: group index unavailable: {e}"),
            }
        }
    }
    let dir = out_dir(g)?;
    let meta = Meta::new(cfg);
    let mut dumps = Vec::new();
    if g.dump_fields {
        for m in &modes {
            let name = format!("mode_{}.fields", m.id);
            dir.write_with(&name, |buf| Ok(fielddump::write_mode(m, buf)?))
                .map_err(Failure::io)?;
            dumps.push(name);
        }
    }
    let body = SolveOutput {
        lambda_nm: cfg.solve.lambda_nm,
        grid: &req.map.grid,
        slot_mode_id: modes.iter().find(|m| m.pol_fraction_y >= 0.5).map(|m| m.id),
        modes: modes.iter().map(ModeSummary::from).collect(),
        field_dumps: dumps,
    };
    dir.write_json("modes.json", &meta, body).map_err(Failure::io)?;
    if modes.is_empty() {
        log::warn!("no guided mode at {} nm", cfg.solve.lambda_nm);
    }
    Ok(())
}

#[derive(Serialize)]
struct OrientationRow {
    lambda_nm: f64,
    orientation: &'static str,
    mode_id: usize,
    n_eff: f64,
    n_g: Option<f64>,
    beta: f64,
    f_wg: f64,
    f_p: f64,
}

#[derive(Serialize)]
struct CouplingOutput {
    f_bg: f64,
    position_nm: [f64; 2],
    orientations: Vec<OrientationRow>,
    displacement_files: Vec<String>,
}

pub fn coupling(cfg: &RunConfig, g: &Global) -> Result<(), Failure> {
    let cc = cfg
        .coupling
        .as_ref()
        .ok_or_else(|| ConfigError::Missing("coupling".into()))?;
    let db = cfg.material_db()?;
    let cs = cfg.require_geometry()?.cross_section(&db)?;
    let model = CouplingModel { f_bg: cc.f_bg };
    let lambdas = if cc.lambdas_nm.is_empty() {
        vec![cfg.solve.lambda_nm]
    } else {
        cc.lambdas_nm.clone()
    };
    let fail = |e| Failure::lib(EXIT_COUPLING, e);
    let mut rows = Vec::new();
    let mut sweeps: Vec<Vec<(f64, CouplingResult<f64>)>> = vec![Vec::new(); cc.orientations.len()];
    for &lam in &lambdas {
        let req = request(cfg, &cs, lam)?;
        let mode = target_mode(cfg, &req)?;
        let table = orientation_table(&mode, (cc.position_nm[0], cc.position_nm[1]), &model).map_err(fail)?;
        for (axis, r) in cc.orientations.iter().map(|&a| (a, &table[a as usize])) {
            rows.push(OrientationRow {
                lambda_nm: lam,
                orientation: axis.name(),
                mode_id: r.mode_id,
                n_eff: mode.n_eff,
                n_g: mode.n_g,
                beta: r.beta,
                f_wg: r.f_wg,
                f_p: r.f_p,
            });
        }
        if !cc.displacements.is_empty() {
            for (k, &axis) in cc.orientations.iter().enumerate() {
                let pts = displacement_sweep(&mode, &cc.displacements, axis.unit(), &model).map_err(fail)?;
                sweeps[k].extend(pts);
            }
        }
    }
    let dir = out_dir(g)?;
    let meta = Meta::new(cfg);
    let mut files = Vec::new();
    if !cc.displacements.is_empty() {
        for (k, axis) in cc.orientations.iter().enumerate() {
            let name = format!("displacement_{}.csv", axis.name());
            let pts = &sweeps[k];
            dir.write_csv(&name, &meta, |buf| Ok(write_displacement_csv(pts, buf)?))
                .map_err(Failure::io)?;
            files.push(name);
        }
    }
    if cfg.output.csv() {
        dir.write_csv("orientations.csv", &meta, |buf| {
            let mut w = csv::Writer::from_writer(buf);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(())
        })
        .map_err(Failure::io)?;
    }
    let body = CouplingOutput {
        f_bg: cc.f_bg,
        position_nm: cc.position_nm,
        orientations: rows,
        displacement_files: files,
    };
    dir.write_json("coupling.json", &meta, body).map_err(Failure::io)?;
    Ok(())
}

#[derive(Serialize)]
struct SweepOutput {
    cells: Vec<SweepSummary<f64>>,
    table: Vec<MaterialRow<f64>>,
}

pub fn sweep(cfg: &RunConfig, g: &Global) -> Result<(), Failure> {
    let sc = cfg.sweep.as_ref().ok_or_else(|| ConfigError::Missing("sweep".into()))?;
    if sc.materials.is_empty() {
        return Err(ConfigError::Missing("sweep.materials".into()).into());
    }
    let bands = sc.band_list()?;
    let threads = g.threads.unwrap_or(sc.threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::config(anyhow!("cannot start {threads} worker threads: {e}")))?;
    let db = cfg.material_db()?;
    let dir = out_dir(g)?;
    let meta = Meta::new(cfg);
    let [w, h, t] = sc.ranges();
    let mut cells = Vec::new();
    let mut table = Vec::new();
    for material in &sc.materials {
        for band in &bands {
            let lc = band.center_nm();
            let settings = EvalSettings {
                dx_nm: cfg.grid.dx_nm,
                dy_nm: cfg.grid.dy_nm,
                padding_lambda: cfg.grid.padding_at(lc) / lc,
                padding_retries: cfg.grid.padding_retries,
                group_index_step_nm: cfg.solve.group_index_step_nm,
                solver: cfg.solve.solver_settings(),
                model: CouplingModel {
                    f_bg: cfg.coupling.as_ref().map_or(1.0, |c| c.f_bg),
                },
            };
            let spec = SweepSpec {
                material: material.clone(),
                band: band.clone(),
                width_nm: w,
                height_nm: h,
                slot_nm: t,
                refine: sc.refine,
                settings,
            };
            let stem = format!("sweep_{material}_{}", band.name);
            let opts = RunOptions {
                journal: sc.journal.then(|| dir.path(&format!("{stem}.journal"))),
            };
            let result = pool
                .install(|| optimize_geometry(&db, &spec, &opts))
                .map_err(|e| Failure::lib(EXIT_SWEEP, e))?;
            if cfg.output.csv() {
                dir.write_csv(&format!("{stem}.csv"), &meta, |buf| Ok(write_points_csv(&result, buf)?))
                    .map_err(Failure::io)?;
            }
            let summary = SweepSummary::from(&result);
            dir.write_json(&format!("{stem}.json"), &meta, &summary).map_err(Failure::io)?;
            table.push(MaterialRow {
                material: material.clone(),
                band: band.name.clone(),
                lambda_nm: result.lambda_nm,
                best_beta: result.best_beta(),
                f_p: result.best.f_p.unwrap_or(f64::NAN),
                f_wg: result.best.f_wg.unwrap_or(f64::NAN),
                geometry_nm: result.best.geometry(),
                loss_note: result.loss_note.clone(),
            });
            cells.push(summary);
        }
    }
    if cfg.output.csv() {
        dir.write_csv("material_table.csv", &meta, |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record([
                "material", "band", "lambda_nm", "best_beta", "F_P", "F_wg", "width_nm", "height_nm", "slot_nm",
                "loss_note",
            ])?;
            for r in &table {
                w.write_record([
                    r.material.clone(),
                    r.band.clone(),
                    r.lambda_nm.to_string(),
                    r.best_beta.to_string(),
                    r.f_p.to_string(),
                    r.f_wg.to_string(),
                    r.geometry_nm.0.to_string(),
                    r.geometry_nm.1.to_string(),
                    r.geometry_nm.2.to_string(),
                    r.loss_note.clone().unwrap_or_default(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })
        .map_err(Failure::io)?;
    }
    dir.write_json("sweep.json", &meta, SweepOutput { cells, table })
        .map_err(Failure::io)?;
    Ok(())
}

#[derive(Serialize)]
struct CqedOutput {
    resonator: ResonatorSpec<f64>,
    emitter: EmitterParams<f64>,
    figures: CavityFigures<f64>,
    gamma_total_per_s: Option<f64>,
    fsr_rate_factor: f64,
}

pub fn cqed(cfg: &RunConfig, g: &Global) -> Result<(), Failure> {
    let c = cfg.cqed.as_ref().ok_or_else(|| ConfigError::Missing("cqed".into()))?;
    let fail = |e| Failure::lib(EXIT_CQED, e);
    let res = ResonatorSpec::new(cqed::ghz_to_hz(c.fsr_ghz), c.lambda0_nm, c.q0).map_err(fail)?;
    let mut em = EmitterParams::new(c.beta, c.f_p)
        .and_then(|e| e.with_emitters(c.n_emitters))
        .map_err(fail)?;
    if let Some(gl) = c.gamma_l_per_s {
        em = em.with_gamma_l(gl).map_err(fail)?;
    }
    let mut figures = cqed::figures(&res, &em).map_err(fail)?;
    let gamma_total = c.gamma_total_per_s.or(c.gamma_l_per_s.map(|gl| gl * c.f_p));
    if let (Some(gt), Some(_)) = (c.gamma_total_per_s, figures.g_n) {
        figures.regime = Some(cqed::classify_regime(&figures, &res, gt).map_err(fail)?);
    }
    let dir = out_dir(g)?;
    let body = CqedOutput {
        resonator: res,
        emitter: em,
        figures,
        gamma_total_per_s: gamma_total,
        fsr_rate_factor: FSR_RATE_FACTOR,
    };
    dir.write_json("cqed.json", &Meta::new(cfg), body).map_err(Failure::io)?;
    Ok(())
}
