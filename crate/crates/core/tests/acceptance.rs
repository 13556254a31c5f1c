//! End-to-end acceptance run: one PASS/FAIL line per criterion.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::tmm::{Pol, Stack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slotqed::coupling::{displacement_sweep, orientation_table, Axis, CouplingModel};
use slotqed::cqed::{self, EmitterParams, ResonatorSpec};
use slotqed::materials::MaterialDatabase;
use slotqed::modesolver::{slot_enhancement, solve_modes, Mode, SolveRequest};
use slotqed::sweep::{
    cross_section, evaluate_mode, optimize_geometry, Band, EvalSettings, Range, RunOptions, SweepResult, SweepSpec,
};

// Criterion 1.
const SLAB_LAMBDA_NM: f64 = 750.0;
const SLAB_RAIL_NM: f64 = 150.0;
const SLAB_SLOT_NM: f64 = 50.0;
const SLAB_STEP_NM: f64 = 5.0;
const SLAB_PADDING_NM: f64 = 450.0;
const SLAB_TOL: f64 = 1e-3;
const SLAB_TIME_LIMIT: Duration = Duration::from_secs(60);
// Criterion 2.
const MIN_POL_Y: f64 = 0.8;
const ENHANCEMENT_REL_TOL: f64 = 0.15;
// Criterion 3.
const MIN_BETA_Y: f64 = 0.6;
const MIN_ORIENTATION_RATIO: f64 = 10.0;
// Criterion 4.
const SYMMETRY_TOL: f64 = 1e-6;
// Criterion 5.
const MATERIALS: [&str; 4] = ["Si", "SiNx", "GaP", "LN"];
const MIN_MATERIAL_BETA: f64 = 0.5;
// Criterion 6.
const KAPPA0_REF: f64 = 2.512e11;
const KAPPA0_REL_TOL: f64 = 1e-3;
const C_REF: f64 = 41.0;
const C_ABS_TOL: f64 = 1.0;
const BETA_PURCELL_PRODUCT: f64 = 20.6;
const IDENTITY_REL_TOL: f64 = 1e-12;
const IDENTITY_SAMPLES: usize = 1000;
// Criterion 7.
const COARSE_NM: f64 = 10.0;
const FINE_NM: f64 = 5.0;
const MAX_NEFF_CHANGE: f64 = 5e-4;
const MAX_FWG_REL_CHANGE: f64 = 0.02;
const SUITE_TIME_LIMIT: Duration = Duration::from_secs(30 * 60);

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, n: usize, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        println!("criterion {n}: {} | {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn index(name: &str, lambda: f64) -> f64 {
    MaterialDatabase::builtin().get(name).unwrap().refractive_index(lambda).unwrap()
}

/// Sweep ranges for the acceptance run: the default lower bounds, upper
/// bounds cut to keep the run short.
fn acceptance_spec(material: &str) -> SweepSpec<f64> {
    let mut s = SweepSpec::new(material, Band::by_name("visible").unwrap());
    s.width_nm = Range::new(200.0, 300.0, 100.0);
    s.height_nm = Range::new(150.0, 450.0, 100.0);
    s.slot_nm = Range::new(20.0, 40.0, 20.0);
    s.refine = true;
    s
}

fn criterion_1(r: &mut Report) {
    let start = Instant::now();
    let cs = common::gap_slab(SLAB_RAIL_NM, SLAB_SLOT_NM);
    let map = common::slab_map(&cs, SLAB_STEP_NM, SLAB_PADDING_NM, SLAB_LAMBDA_NM);
    let modes = solve_modes(&SolveRequest::new(map, 4)).unwrap();
    let elapsed = start.elapsed();
    let (n_gap, n_sio2) = (index("GaP", SLAB_LAMBDA_NM), index("SiO2", SLAB_LAMBDA_NM));
    let stack = Stack {
        substrate: n_sio2,
        cover: n_sio2,
        layers: vec![(n_gap, SLAB_RAIL_NM), (n_sio2, SLAB_SLOT_NM), (n_gap, SLAB_RAIL_NM)],
    };
    let mut errs = Vec::new();
    for (pol, tm) in [(Pol::Tm, true), (Pol::Te, false)] {
        let oracle = stack.modes(SLAB_LAMBDA_NM, pol)[0];
        let solved = modes.iter().find(|m| (m.pol_fraction_y > 0.5) == tm).map(|m| m.n_eff);
        errs.push(solved.map_or(f64::INFINITY, |n| (n - oracle).abs()));
    }
    let ok = errs.iter().all(|&e| e <= SLAB_TOL) && elapsed < SLAB_TIME_LIMIT;
    r.line(
        1,
        ok,
        format!(
            "slab |dn_eff| TM {:.2e}, TE {:.2e} (limit {SLAB_TOL:.0e}); solve {:.1} s (limit {} s)",
            errs[0],
            errs[1],
            elapsed.as_secs_f64(),
            SLAB_TIME_LIMIT.as_secs()
        ),
    );
}

fn criterion_2(r: &mut Report, gap: &SweepResult<f64>, mode: &Mode<f64>) {
    let lambda = gap.lambda_nm;
    let ratio = (index("GaP", lambda) / index("SiO2", lambda)).powi(2);
    let e = slot_enhancement(mode);
    let rel = (e - ratio).abs() / ratio;
    let ok = mode.pol_fraction_y > MIN_POL_Y && rel <= ENHANCEMENT_REL_TOL;
    let (w, h, t) = gap.best.geometry();
    r.line(
        2,
        ok,
        format!(
            "GaP optimum {w}/{h}/{t} nm at {lambda} nm: pol_y {:.3} (> {MIN_POL_Y}); slot Ey enhancement {e:.3} vs eps ratio {ratio:.3}, off by {:.1}% (limit {:.0}%)",
            mode.pol_fraction_y,
            100.0 * rel,
            100.0 * ENHANCEMENT_REL_TOL
        ),
    );
}

fn criterion_3(r: &mut Report, mode: &Mode<f64>) {
    let pos = (0.0, mode.map.cross_section.monolayer_offset_nm);
    let [x, y, z] = orientation_table(mode, pos, &CouplingModel::default()).unwrap();
    let (rx, rz) = (y.beta / x.beta, y.beta / z.beta);
    let ok = y.beta >= MIN_BETA_Y && rx >= MIN_ORIENTATION_RATIO && rz >= MIN_ORIENTATION_RATIO;
    r.line(
        3,
        ok,
        format!(
            "beta y {:.4} (>= {MIN_BETA_Y}), x {:.2e}, z {:.2e}; y/x {rx:.3e}, y/z {rz:.3e} (>= {MIN_ORIENTATION_RATIO})",
            y.beta, x.beta, z.beta
        ),
    );
}

fn criterion_4(r: &mut Report, mode: &Mode<f64>) {
    let u: Vec<f64> = (-4..=4).map(|k| 0.2 * k as f64).collect();
    let rows = displacement_sweep(mode, &u, Axis::Y.unit(), &CouplingModel::default()).unwrap();
    let beta = |k: i32| rows[(k + 4) as usize].1.beta;
    let strict_max = (1..=4).all(|k| beta(k) < beta(0) && beta(-k) < beta(0));
    let monotone = (0..4).all(|k| beta(k + 1) <= beta(k));
    let asym = (1..=4).map(|k| (beta(k) - beta(-k)).abs()).fold(0.0, f64::max);
    let ok = strict_max && monotone && asym <= SYMMETRY_TOL;
    let profile: Vec<String> = (0..=4).map(|k| format!("{:.4}", beta(k))).collect();
    r.line(
        4,
        ok,
        format!(
            "beta(u=0,0.2,..,0.8) = [{}]; strict max at 0: {strict_max}; non-increasing: {monotone}; max |beta(u)-beta(-u)| {asym:.1e} (limit {SYMMETRY_TOL:.0e})",
            profile.join(", ")
        ),
    );
}

fn criterion_5(r: &mut Report, results: &[SweepResult<f64>]) {
    let best_fwg = |m: &str| results.iter().find(|r| r.material == m).and_then(|r| r.best.f_wg).unwrap();
    let all_above = results.iter().all(|r| r.best_beta() > MIN_MATERIAL_BETA);
    let si = best_fwg("Si");
    let si_top = MATERIALS.iter().filter(|&&m| m != "Si").all(|&m| best_fwg(m) < si);
    let cells: Vec<String> = results
        .iter()
        .map(|r| {
            let (w, h, t) = r.best.geometry();
            format!("{} beta {:.4} F_wg {:.3} at {w}/{h}/{t}", r.material, r.best_beta(), r.best.f_wg.unwrap())
        })
        .collect();
    r.line(
        5,
        all_above && si_top,
        format!(
            "{}; all beta > {MIN_MATERIAL_BETA}: {all_above}; Si has the largest F_wg: {si_top}",
            cells.join("; ")
        ),
    );
}

fn criterion_6(r: &mut Report) {
    let ring = ResonatorSpec::new(cqed::ghz_to_hz(500.0), 750.0, 1e4).unwrap();
    let k0 = cqed::kappa0(&ring).unwrap();
    let k_rel = (k0 - KAPPA0_REF).abs() / KAPPA0_REF;
    let beta = 0.85;
    let em = EmitterParams::new(beta, BETA_PURCELL_PRODUCT / beta - 1.0).unwrap();
    let c = cqed::cooperativity(&ring, &em).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(20_261_019);
    let mut worst: f64 = 0.0;
    for _ in 0..IDENTITY_SAMPLES {
        let res = ResonatorSpec::new(
            cqed::ghz_to_hz(rng.gen_range(1.0..5000.0)),
            rng.gen_range(300.0..2000.0),
            10f64.powf(rng.gen_range(2.0..8.0)),
        )
        .unwrap();
        let gamma_l = 10f64.powf(rng.gen_range(6.0..12.0));
        let em = EmitterParams::new(rng.gen_range(0.01..=1.0), rng.gen_range(0.0..1000.0))
            .unwrap()
            .with_gamma_l(gamma_l)
            .unwrap();
        let direct = cqed::cooperativity(&res, &em).unwrap();
        let via_g1 = cqed::cooperativity_from_g1(cqed::vacuum_rabi(&res, &em).unwrap(), cqed::kappa0(&res).unwrap(), gamma_l);
        worst = worst.max((direct - via_g1).abs() / direct);
    }
    let ok = k_rel <= KAPPA0_REL_TOL && (c - C_REF).abs() <= C_ABS_TOL && worst <= IDENTITY_REL_TOL;
    r.line(
        6,
        ok,
        format!(
            "kappa0 {k0:.4e} s^-1 (off {:.3}%, limit {:.1}%); C {c:.3} (target {C_REF} +/- {C_ABS_TOL}); identity worst rel {worst:.1e} over {IDENTITY_SAMPLES} samples (limit {IDENTITY_REL_TOL:.0e})",
            100.0 * k_rel,
            100.0 * KAPPA0_REL_TOL
        ),
    );
}

fn criterion_7(r: &mut Report, gap: &SweepResult<f64>, suite_start: Instant) {
    let db = MaterialDatabase::builtin();
    let cs = cross_section(&db, "GaP", gap.best.geometry()).unwrap();
    let eval = |step: f64| {
        let settings = EvalSettings {
            dx_nm: step,
            dy_nm: step,
            ..gap.settings
        };
        evaluate_mode(&cs, gap.lambda_nm, &settings).unwrap()
    };
    let (coarse, c_coarse) = eval(COARSE_NM);
    let (fine, c_fine) = eval(FINE_NM);
    let dn = (coarse.n_eff - fine.n_eff).abs();
    let df = (c_coarse.f_wg - c_fine.f_wg).abs() / c_fine.f_wg;
    let elapsed = suite_start.elapsed();
    let ok = dn <= MAX_NEFF_CHANGE && df <= MAX_FWG_REL_CHANGE && elapsed < SUITE_TIME_LIMIT;
    let spacing = |m: &Mode<f64>| format!("{}x{}", m.grid().dx, m.grid().dy);
    r.line(
        7,
        ok,
        format!(
            "grid {} -> {} nm: |dn_eff| {dn:.2e} (limit {MAX_NEFF_CHANGE:.0e}), F_wg change {:.2}% (limit {:.0}%); criteria 1-7 took {:.0} s (limit {} s)",
            spacing(&coarse),
            spacing(&fine),
            100.0 * df,
            100.0 * MAX_FWG_REL_CHANGE,
            elapsed.as_secs_f64(),
            SUITE_TIME_LIMIT.as_secs()
        ),
    );
}

fn main() -> ExitCode {
    let suite_start = Instant::now();
    let db = MaterialDatabase::builtin();
    let mut report = Report { failed: 0 };

    criterion_1(&mut report);

    let gap = optimize_geometry(&db, &acceptance_spec("GaP"), &RunOptions::default()).unwrap();
    let gap_cs = cross_section(&db, "GaP", gap.best.geometry()).unwrap();
    let (mode, _) = evaluate_mode(&gap_cs, gap.lambda_nm, &gap.settings).unwrap();
    criterion_2(&mut report, &gap, &mode);
    criterion_3(&mut report, &mode);
    criterion_4(&mut report, &mode);

    let results: Vec<SweepResult<f64>> = MATERIALS
        .iter()
        .map(|&m| {
            if m == "GaP" {
                gap.clone()
            } else {
                optimize_geometry(&db, &acceptance_spec(m), &RunOptions::default()).unwrap()
            }
        })
        .collect();
    criterion_5(&mut report, &results);
    criterion_6(&mut report);
    criterion_7(&mut report, &gap, suite_start);

    println!("acceptance: {} of 7 criteria passed", 7 - report.failed);
    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
