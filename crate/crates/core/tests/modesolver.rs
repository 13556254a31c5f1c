mod common;

use common::tmm::{Pol, Stack};
use slotqed::fielddump::{read_dump, write_mode};
use slotqed::geometry::{rasterize, CrossSection, Grid2D, Lateral};
use slotqed::linalg::ArnoldiSettings;
use slotqed::materials::{MaterialDatabase, MaterialModel};
use slotqed::modesolver::*;
use slotqed::Error;

const LAMBDA: f64 = 750.0;

fn index(name: &str, lambda: f64) -> f64 {
    MaterialDatabase::builtin().get(name).unwrap().refractive_index(lambda).unwrap()
}

#[test]
fn oracle_symmetric_slab_matches_closed_form_te() {
    // Symmetric slab TE0: tan(k d / 2) = γ / k.
    let (n1, n2, d, lam) = (3.0, 1.5, 200.0, 1000.0);
    let s = Stack {
        substrate: n2,
        cover: n2,
        layers: vec![(n1, d)],
    };
    let ne = s.modes(lam, Pol::Te)[0];
    let k0 = 2.0 * std::f64::consts::PI / lam;
    let k = k0 * (n1 * n1 - ne * ne).sqrt();
    let g = k0 * (ne * ne - n2 * n2).sqrt();
    assert!(((k * d / 2.0).tan() - g / k).abs() < 1e-9);
}

#[test]
fn oracle_symmetric_slab_matches_closed_form_tm() {
    // Symmetric slab TM0: tan(k d / 2) = (n1²/n2²) γ / k.
    let (n1, n2, d, lam) = (3.0, 1.5, 200.0, 1000.0);
    let s = Stack {
        substrate: n2,
        cover: n2,
        layers: vec![(n1, d)],
    };
    let ne = s.modes(lam, Pol::Tm)[0];
    let k0 = 2.0 * std::f64::consts::PI / lam;
    let k = k0 * (n1 * n1 - ne * ne).sqrt();
    let g = k0 * (ne * ne - n2 * n2).sqrt();
    assert!(((k * d / 2.0).tan() - (n1 * n1 / (n2 * n2)) * g / k).abs() < 1e-9);
}

#[test]
fn oracle_splitting_a_layer_changes_nothing() {
    let one = Stack {
        substrate: 1.45,
        cover: 1.0,
        layers: vec![(3.2, 300.0)],
    };
    let two = Stack {
        substrate: 1.45,
        cover: 1.0,
        layers: vec![(3.2, 120.0), (3.2, 180.0)],
    };
    for pol in [Pol::Te, Pol::Tm] {
        let (a, b) = (one.modes(800.0, pol), two.modes(800.0, pol));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

fn slab_modes(cs: &CrossSection<f64>, h: f64, padding: f64, lambda: f64, n: usize) -> Vec<Mode<f64>> {
    let map = common::slab_map(cs, h, padding, lambda);
    solve_modes(&SolveRequest::new(map, n)).unwrap()
}

fn first(modes: &[Mode<f64>], tm: bool) -> &Mode<f64> {
    modes
        .iter()
        .find(|m| (m.pol_fraction_y > 0.5) == tm)
        .expect("mode of the requested polarization")
}

#[test]
fn asymmetric_five_layer_stack_matches_oracle() {
    // SiO₂ substrate | GaP | SiO₂ | GaP | air cover.
    let db = MaterialDatabase::builtin();
    let cs = CrossSection::new(&db, "GaP", f64::INFINITY, 300.0, 40.0).unwrap();
    let modes = slab_modes(&cs, 5.0, 600.0, LAMBDA, 6);
    let (n_gap, n_sio2) = (index("GaP", LAMBDA), index("SiO2", LAMBDA));
    let stack = Stack {
        substrate: n_sio2,
        cover: 1.0,
        layers: vec![(n_gap, 130.0), (n_sio2, 40.0), (n_gap, 130.0)],
    };
    let tm = stack.modes(LAMBDA, Pol::Tm)[0];
    let te = stack.modes(LAMBDA, Pol::Te)[0];
    assert!((first(&modes, true).n_eff - tm).abs() <= 1e-3, "TM {} vs {tm}", first(&modes, true).n_eff);
    assert!((first(&modes, false).n_eff - te).abs() <= 1e-3, "TE {} vs {te}", first(&modes, false).n_eff);
}

#[test]
fn symmetric_slab_te_matches_oracle() {
    let cs = common::gap_slab(150.0, 50.0);
    let modes = slab_modes(&cs, 5.0, 450.0, LAMBDA, 4);
    let (n_gap, n_sio2) = (index("GaP", LAMBDA), index("SiO2", LAMBDA));
    let stack = Stack {
        substrate: n_sio2,
        cover: n_sio2,
        layers: vec![(n_gap, 150.0), (n_sio2, 50.0), (n_gap, 150.0)],
    };
    let te = stack.modes(LAMBDA, Pol::Te)[0];
    assert!((first(&modes, false).n_eff - te).abs() <= 1e-3);
}

fn constant_slab() -> CrossSection<f64> {
    let hi = MaterialModel::constant("hi", 3.2).unwrap();
    let lo = MaterialModel::constant("lo", 1.45).unwrap();
    CrossSection {
        rail_material: hi,
        width_nm: f64::INFINITY,
        height_nm: 350.0,
        slot_nm: 50.0,
        slot_material: lo.clone(),
        substrate_material: lo.clone(),
        cladding_material: lo,
        monolayer_offset_nm: 0.0,
    }
}

#[test]
fn constant_index_slab_group_index_matches_oracle() {
    let cs = constant_slab();
    let map = common::slab_map(&cs, 5.0, 450.0, LAMBDA);
    let req = SolveRequest::new(map, 4);
    let modes = solve_with_group_index(&req, 1.0).unwrap();
    let tm = first(&modes, true);
    let stack_at = |_l: f64| Stack {
        substrate: 1.45,
        cover: 1.45,
        layers: vec![(3.2, 150.0), (1.45, 50.0), (3.2, 150.0)],
    };
    let expect = Stack::group_index(stack_at, LAMBDA, Pol::Tm, 0, 1.0);
    let got = tm.n_g.unwrap();
    assert!((got - expect).abs() / expect < 0.01, "n_g {got} vs {expect}");
    assert!(got > tm.n_eff);
}

/// Uniform box of `nx × ny` cells with PEC walls.
fn uniform_box(n: f64, nx: usize, ny: usize, h: f64, lambda: f64) -> slotqed::geometry::PermittivityMap<f64> {
    let cs = CrossSection::uniform(MaterialModel::constant("fill", n).unwrap());
    let grid = Grid2D {
        dx: h,
        dy: h,
        nx,
        ny,
        origin: (-(nx as f64) * h / 2.0, -(ny as f64) * h / 2.0),
        padding_nm: 0.0,
        lateral: Lateral::Pec,
    };
    rasterize(&cs, &grid, lambda).unwrap()
}

/// Discrete transverse wavenumbers of the staggered Dirichlet box:
/// TE family `m + n ≥ 1`, TM family `m, n ≥ 1`.
fn box_kt2(a: f64, b: f64, h: f64, count: usize) -> Vec<f64> {
    let s = |m: usize, l: f64| (2.0 / h * (m as f64 * std::f64::consts::PI * h / (2.0 * l)).sin()).powi(2);
    let (mx, my) = ((a / h) as usize, (b / h) as usize);
    let mut out = Vec::new();
    for m in 0..mx {
        for n in 0..my {
            if m + n >= 1 {
                out.push(s(m, a) + s(n, b));
            }
            if m >= 1 && n >= 1 {
                out.push(s(m, a) + s(n, b));
            }
        }
    }
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    out.truncate(count);
    out
}

#[test]
fn hollow_box_has_discrete_dirichlet_spectrum() {
    let (nx, ny, h, lambda) = (30, 20, 20.0, 1000.0);
    let map = uniform_box(1.0, nx, ny, h, lambda);
    let k0 = wavenumber(lambda);
    let nev = 6;
    let pairs = eigenpairs(&map, 1.0, nev, &ArnoldiSettings::default()).unwrap();
    let mut got: Vec<f64> = pairs.iter().map(|p| k0 * k0 - p.value).collect();
    got.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let expect = box_kt2(nx as f64 * h, ny as f64 * h, h, nev);
    for (g, e) in got.iter().zip(&expect) {
        assert!((g - e).abs() <= 1e-8 * k0 * k0, "k_t² {g} vs {e}");
    }
    // Lowest is TE10 across the long side; π²(1/a² + 1/b²) (TM11) lies higher.
    let (a, b) = (nx as f64 * h, ny as f64 * h);
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((got[0] - pi2 / (a * a)).abs() / got[0] < 2e-3);
    let tm11 = pi2 * (1.0 / (a * a) + 1.0 / (b * b));
    assert!(got[0] < tm11);
    assert!(got.iter().any(|&v| (v - tm11).abs() / tm11 < 2e-3));
}

#[test]
fn box_mode_group_index_exceeds_effective_index() {
    let (nx, ny, h, n) = (30, 20, 20.0, 1.5);
    let neff = |lambda: f64| {
        let map = uniform_box(n, nx, ny, h, lambda);
        let k0 = wavenumber(lambda);
        let pairs = eigenpairs(&map, n, 1, &ArnoldiSettings::default()).unwrap();
        pairs[0].value.sqrt() / k0
    };
    let (lam, dl) = (1000.0, 1.0);
    let n0 = neff(lam);
    let ng = n0 - lam * (neff(lam + dl) - neff(lam - dl)) / (2.0 * dl);
    assert!(ng >= n0);
    // Dispersionless fill: n_g = n² / n_eff.
    assert!((ng - n * n / n0).abs() < 1e-5);
}

fn gap_slot(step: f64) -> SolveRequest<f64> {
    let map = common::slot_map("GaP", 400.0, 350.0, 50.0, step, 450.0, LAMBDA);
    SolveRequest::new(map, 3)
}

#[test]
fn gap_slot_mode_invariants() {
    let req = gap_slot(10.0);
    let modes = solve_modes(&req).unwrap();
    assert!(!modes.is_empty());
    let (n_sio2, n_gap) = (index("SiO2", LAMBDA), index("GaP", LAMBDA));
    for (k, m) in modes.iter().enumerate() {
        assert_eq!(m.id, k);
        assert!(m.n_eff > n_sio2 && m.n_eff < n_gap);
        assert!((m.power - 1.0).abs() <= 1e-9);
        assert!((axial_power(&m.fields, m.grid()) - 1.0).abs() <= 1e-9);
        assert!((0.0..=1.0).contains(&m.pol_fraction_y));
        assert!((0.0..=1.0).contains(&m.gamma_slot));
        assert!(m.residual <= 1e-8);
    }
    for w in modes.windows(2) {
        assert!(w[0].n_eff >= w[1].n_eff - 1e-6);
    }
    let slot = slot_mode(&modes).unwrap();
    assert!(slot.pol_fraction_y > 0.8);
    assert!(slot.gamma_slot > 0.1);
    // D continuity at the flat part of the interface.
    let ratio = (n_gap / n_sio2).powi(2);
    assert!((interface_jump(slot) - ratio).abs() / ratio < 0.1);
}

#[test]
fn fundamental_mode_is_mirror_symmetric() {
    let req = gap_slot(10.0);
    let m = find_slot_mode(&req).unwrap();
    let g = m.grid();
    let (cols, rows) = Component::Ey.dims(g.nx, g.ny);
    let peak = m.fields.ey.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for j in 0..rows {
        for i in 0..cols {
            let (a, b) = (m.fields.ey[j * cols + i].norm(), m.fields.ey[j * cols + cols - 1 - i].norm());
            worst = worst.max((a - b).abs() / peak);
        }
    }
    assert!(worst <= 1e-6, "asymmetry {worst:e}");
}

#[test]
fn slot_enhancement_near_permittivity_ratio_at_5nm() {
    let map = common::slot_map("GaP", 300.0, 300.0, 40.0, 5.0, 450.0, LAMBDA);
    let m = find_slot_mode(&SolveRequest::new(map, 3)).unwrap();
    let ratio = (index("GaP", LAMBDA) / index("SiO2", LAMBDA)).powi(2);
    let e = slot_enhancement(&m);
    assert!((e - ratio).abs() / ratio <= 0.15, "enhancement {e} vs {ratio}");
    assert!((interface_jump(&m) - ratio).abs() / ratio <= 0.02);
}

#[test]
fn gap_slot_group_index_regression() {
    let req = gap_slot(10.0);
    let m = find_slot_mode(&req).unwrap();
    let ng = group_index(&req, m.id, 1.0).unwrap();
    assert!(ng > m.n_eff);
    // Pinned at 10 nm spacing, 450 nm padding.
    assert!((m.n_eff - PIN_NEFF).abs() < 1e-6, "n_eff {}", m.n_eff);
    assert!((ng - PIN_NG).abs() < 1e-4, "n_g {ng:.12}");
}

const PIN_NEFF: f64 = 2.3787742780253667;
const PIN_NG: f64 = 3.903968199688;

#[test]
fn repeated_solves_are_bitwise_identical() {
    let a = solve_modes(&gap_slot(10.0)).unwrap();
    let b = solve_modes(&gap_slot(10.0)).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.n_eff.to_bits(), y.n_eff.to_bits());
        assert_eq!(x.fields.ey, y.fields.ey);
    }
}

#[test]
fn single_precision_solve_agrees() {
    let db = MaterialDatabase::builtin();
    let cs = CrossSection::<f32>::new(&db, "GaP", 400.0, 350.0, 50.0).unwrap();
    let grid = Grid2D::around(&cs, 10.0, 10.0, 450.0).unwrap();
    let map = rasterize(&cs, &grid, 750.0f32).unwrap();
    let m32 = find_slot_mode(&SolveRequest::new(map, 3)).unwrap();
    let m64 = find_slot_mode(&gap_slot(10.0)).unwrap();
    assert!((m32.n_eff as f64 - m64.n_eff).abs() < 1e-4, "{} vs {}", m32.n_eff, m64.n_eff);
    assert!(m32.pol_fraction_y > 0.8);
}

#[test]
fn request_validation() {
    let req = gap_slot(20.0);
    let mut r = req.clone();
    r.n_modes = 0;
    assert!(matches!(solve_modes(&r), Err(Error::Config(_))));
    let mut r = req.clone();
    r.n_eff_guess = Some(5.0);
    assert!(matches!(solve_modes(&r), Err(Error::Config(_))));
    let mut r = req.clone();
    r.n_eff_guess = Some(0.9);
    assert!(matches!(solve_modes(&r), Err(Error::Config(_))));
    let narrow = common::slot_map("GaP", 400.0, 350.0, 50.0, 20.0, 200.0, LAMBDA);
    assert!(matches!(solve_modes(&SolveRequest::new(narrow, 1)), Err(Error::Config(_))));
}

#[test]
fn tiny_grid_is_rejected() {
    let map = uniform_box(1.5, 6, 20, 20.0, 1000.0);
    assert!(matches!(assemble_operator(&map), Err(Error::Config(_))));
}

#[test]
fn no_guided_mode_is_an_empty_result() {
    // A thin wire on SiO₂ below cutoff.
    let db = MaterialDatabase::builtin();
    let cs = CrossSection::new(&db, "SiNx", 60.0, 50.0, 10.0).unwrap();
    let grid = Grid2D::around(&cs, 10.0, 10.0, 900.0).unwrap();
    let map = rasterize(&cs, &grid, 1600.0).unwrap();
    let modes = solve_modes(&SolveRequest::new(map, 2)).unwrap();
    assert!(modes.is_empty());
}

#[test]
fn field_dump_round_trip() {
    let m = find_slot_mode(&gap_slot(20.0)).unwrap();
    let mut buf = Vec::new();
    write_mode(&m, &mut buf).unwrap();
    let dump = read_dump(std::io::Cursor::new(&buf)).unwrap();
    let g = m.grid();
    assert_eq!((dump.nx, dump.ny), (g.nx, g.ny));
    assert_eq!((dump.dx_nm, dump.dy_nm), (g.dx, g.dy));
    assert_eq!(dump.origin_nm, g.origin);
    assert_eq!(dump.n_eff, m.n_eff);
    for c in Component::ALL {
        assert_eq!(dump.component(c).unwrap(), m.fields.component(c));
    }
    let header_len = buf.iter().position(|&b| b == b'\n').unwrap() + 1;
    let floats: usize = Component::ALL.iter().map(|c| {
        let (a, b) = c.dims(g.nx, g.ny);
        a * b * 2
    }).sum();
    assert_eq!(buf.len(), header_len + 8 * floats);
    assert!(read_dump(std::io::Cursor::new(b"garbage\n".to_vec())).is_err());
}
