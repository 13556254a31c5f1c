//! Full-vector finite-difference eigenmode solver.
//!
//! Unknowns are the transverse fields `Ex`, `Ey` on a staggered grid:
//! `Ex(i, j)` at `((i + ½)dx, j dy)`, `Ey(i, j)` at `(i dx, (j + ½)dy)` and
//! the longitudinal field at the nodes `(i dx, j dy)`. With the node scalar
//! `φ = ∇·(ε_t E_t) / ε_z` the wave equation reads
//!
//! ```text
//! β² Ex = ∂x φ + ∂y² Ex + k0² εx Ex − ∂x ∂y Ey
//! β² Ey = ∂y φ + ∂x² Ey + k0² εy Ey − ∂x ∂y Ex
//! ```
//!
//! and `Ez = −i φ / β`. Window edges are perfect electric conductors, or
//! periodic in `x` for laterally uniform stacks.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ex_dims, ey_dims, ez_dims, Grid2D, Lateral, PermittivityMap};
use crate::linalg::{shift_invert_eigs_above, ArnoldiSettings, CsrMatrix, EigenPair, GroupLayout, SparseLu, Symbolic};
use crate::scalar::Real;

/// Smallest number of cells accepted along either axis.
pub const MIN_CELLS: usize = 8;

/// Staggered sample location of a field component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    Ex,
    Ey,
    Ez,
    Hx,
    Hy,
    Hz,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::Ex,
        Component::Ey,
        Component::Ez,
        Component::Hx,
        Component::Hy,
        Component::Hz,
    ];

    /// Offset of sample `(0, 0)` from node `(0, 0)` in cells.
    pub fn offset(self) -> (f64, f64) {
        match self {
            Component::Ex | Component::Hy => (0.5, 0.0),
            Component::Ey | Component::Hx => (0.0, 0.5),
            Component::Ez => (0.0, 0.0),
            Component::Hz => (0.5, 0.5),
        }
    }

    /// Array dimensions (columns, rows) on an `nx × ny` cell grid.
    pub fn dims(self, nx: usize, ny: usize) -> (usize, usize) {
        match self {
            Component::Ex | Component::Hy => ex_dims(nx, ny),
            Component::Ey | Component::Hx => ey_dims(nx, ny),
            Component::Ez => ez_dims(nx, ny),
            Component::Hz => (nx, ny),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Ex => "Ex",
            Component::Ey => "Ey",
            Component::Ez => "Ez",
            Component::Hx => "Hx",
            Component::Hy => "Hy",
            Component::Hz => "Hz",
        }
    }
}

/// Sampled complex fields, each row-major with `x` fastest. `H` is scaled by
/// the vacuum impedance so that `E` and `H` share units.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeFields<T> {
    pub ex: Vec<Complex<T>>,
    pub ey: Vec<Complex<T>>,
    pub ez: Vec<Complex<T>>,
    pub hx: Vec<Complex<T>>,
    pub hy: Vec<Complex<T>>,
    pub hz: Vec<Complex<T>>,
}

impl<T: Real> ModeFields<T> {
    pub fn component(&self, c: Component) -> &[Complex<T>] {
        match c {
            Component::Ex => &self.ex,
            Component::Ey => &self.ey,
            Component::Ez => &self.ez,
            Component::Hx => &self.hx,
            Component::Hy => &self.hy,
            Component::Hz => &self.hz,
        }
    }

    fn scale(&mut self, s: Complex<T>) {
        for v in [
            &mut self.ex,
            &mut self.ey,
            &mut self.ez,
            &mut self.hx,
            &mut self.hy,
            &mut self.hz,
        ] {
            v.iter_mut().for_each(|z| *z = *z * s);
        }
    }
}

/// A guided eigenmode.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode<T> {
    /// Position in the solve result, 0 for the highest `n_eff`.
    pub id: usize,
    pub lambda_nm: T,
    pub n_eff: T,
    /// Filled by [`attach_group_indices`].
    pub n_g: Option<T>,
    /// Axial power `∫ ½ Re(E × H*)·ẑ dA` of the stored fields.
    pub power: T,
    pub pol_fraction_y: T,
    pub gamma_slot: T,
    /// `‖Av − β²v‖ / (‖v‖ (n_rail k0)²)`.
    pub residual: T,
    pub fields: ModeFields<T>,
    pub map: PermittivityMap<T>,
}

impl<T: Real> Mode<T> {
    pub fn grid(&self) -> &Grid2D<T> {
        &self.map.grid
    }

    pub fn beta(&self) -> T {
        self.n_eff * wavenumber(self.lambda_nm)
    }

    /// Physical position of sample `(i, j)` of component `c`.
    pub fn sample_position(&self, c: Component, i: usize, j: usize) -> (T, T) {
        let (sx, sy) = c.offset();
        let g = self.grid();
        (g.x_at(i, T::lit(sx)), g.y_at(j, T::lit(sy)))
    }

    /// `∫ ε_r |E|² dA` in nm².
    pub fn electric_energy(&self) -> T {
        let g = self.grid();
        let m = &self.map;
        let (nx, ny) = (g.nx, g.ny);
        let mut s = T::zero();
        for (c, eps, arr) in [
            (Component::Ex, &m.eps_x, &self.fields.ex),
            (Component::Ey, &m.eps_y, &self.fields.ey),
            (Component::Ez, &m.eps_z, &self.fields.ez),
        ] {
            let (cols, rows) = c.dims(nx, ny);
            let ucols = unique_cols(c, g);
            for j in 0..rows {
                for i in 0..ucols {
                    let k = j * cols + i;
                    s += eps[k] * arr[k].norm_sqr();
                }
            }
        }
        s * g.dx * g.dy
    }

    /// Multiplies every field by `s`; all derived ratios are unchanged.
    pub fn rescale(&mut self, s: Complex<T>) {
        self.fields.scale(s);
        self.power = self.power * s.norm_sqr();
    }
}

/// Number of distinct columns of a component (periodic windows repeat the
/// first node column at the right edge).
fn unique_cols<T: Real>(c: Component, g: &Grid2D<T>) -> usize {
    let cols = c.dims(g.nx, g.ny).0;
    match (g.lateral, c) {
        (Lateral::Periodic, Component::Ey | Component::Hx | Component::Ez) => cols - 1,
        _ => cols,
    }
}

/// Vacuum wavenumber in nm⁻¹.
pub fn wavenumber<T: Real>(lambda_nm: T) -> T {
    T::lit(2.0) * T::PI() / lambda_nm
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings<T> {
    pub arnoldi: ArnoldiSettings<T>,
    /// Largest accepted boundary-to-peak field magnitude ratio.
    pub boundary_ratio: T,
    /// Minimum waveguide-to-wall clearance as a fraction of `λ`.
    pub min_padding_lambda: T,
}

impl<T: Real> Default for SolverSettings<T> {
    fn default() -> Self {
        let mut arnoldi = ArnoldiSettings::default();
        arnoldi.tol = T::lit(1e-8).max(T::epsilon() * T::lit(100.0));
        SolverSettings {
            arnoldi,
            boundary_ratio: T::lit(1e-3),
            min_padding_lambda: T::lit(0.5),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveRequest<T> {
    pub map: PermittivityMap<T>,
    pub n_modes: usize,
    /// Shift index; defaults to `0.98 n_rail`.
    pub n_eff_guess: Option<T>,
    pub settings: SolverSettings<T>,
}

impl<T: Real> SolveRequest<T> {
    pub fn new(map: PermittivityMap<T>, n_modes: usize) -> Self {
        SolveRequest {
            map,
            n_modes,
            n_eff_guess: None,
            settings: SolverSettings::default(),
        }
    }

    pub fn lambda_nm(&self) -> T {
        self.map.lambda_nm
    }

    fn guess(&self) -> Result<T> {
        let n_rail = self.map.rail_index()?;
        let g = self.n_eff_guess.unwrap_or(T::lit(0.98) * n_rail);
        if !(g > T::one() && g < n_rail) {
            return Err(Error::Config(format!(
                "n_eff guess {g} must lie inside (1, {n_rail})"
            )));
        }
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::Config("n_modes must be at least 1".into()));
        }
        let g = &self.map.grid;
        let lam = self.map.lambda_nm;
        let clearance = g.clearance(&self.map.cross_section);
        if clearance < self.settings.min_padding_lambda * lam {
            return Err(Error::Config(format!(
                "window clearance {clearance} nm is below {} x lambda ({lam} nm); enlarge the padding",
                self.settings.min_padding_lambda
            )));
        }
        Ok(())
    }
}

/// Sparse operator `A` with `A [Ex; Ey] = β² [Ex; Ey]`.
#[derive(Debug, Clone)]
pub struct Operator<T> {
    pub matrix: CsrMatrix<T>,
    pub layout: GroupLayout,
    pub k0: T,
    stencil: Stencil,
}

/// Unknown numbering on the staggered grid.
#[derive(Debug, Clone)]
struct Stencil {
    nx: usize,
    ny: usize,
    periodic: bool,
    ex_id: Vec<Option<usize>>,
    ey_id: Vec<Option<usize>>,
    n: usize,
}

impl Stencil {
    fn new(nx: usize, ny: usize, periodic: bool) -> (Self, GroupLayout) {
        let (gx, gy) = (if periodic { nx } else { nx + 1 }, ny + 1);
        let mut ex_id = vec![None; nx * (ny + 1)];
        let mut ey_id = vec![None; (nx + 1) * ny];
        let mut groups = vec![Vec::new(); gx * gy];
        let mut n = 0;
        for j in 0..gy {
            for i in 0..gx {
                let g = &mut groups[j * gx + i];
                if i < nx && j > 0 && j < ny {
                    ex_id[j * nx + i] = Some(n);
                    g.push(n);
                    n += 1;
                }
                if j < ny && (periodic || (i > 0 && i < nx)) {
                    ey_id[j * (nx + 1) + i] = Some(n);
                    g.push(n);
                    n += 1;
                }
            }
        }
        if periodic {
            for j in 0..ny {
                ey_id[j * (nx + 1) + nx] = ey_id[j * (nx + 1)];
            }
        }
        let layout = GroupLayout::from_groups(gx, gy, !periodic, &groups);
        (
            Stencil {
                nx,
                ny,
                periodic,
                ex_id,
                ey_id,
                n,
            },
            layout,
        )
    }

    /// Wraps a possibly out-of-range column; `None` outside a PEC window.
    fn col(&self, i: isize, cols: usize) -> Option<usize> {
        if self.periodic {
            Some(i.rem_euclid(self.nx as isize) as usize)
        } else if i >= 0 && (i as usize) < cols {
            Some(i as usize)
        } else {
            None
        }
    }

    fn ex(&self, i: isize, j: isize) -> Option<usize> {
        let i = self.col(i, self.nx)?;
        if j < 0 || j as usize > self.ny {
            return None;
        }
        self.ex_id[j as usize * self.nx + i]
    }

    fn ey(&self, i: isize, j: isize) -> Option<usize> {
        let i = self.col(i, self.nx + 1)?;
        if j < 0 || j as usize >= self.ny {
            return None;
        }
        self.ey_id[j as usize * (self.nx + 1) + i]
    }

    fn node_is_boundary(&self, i: isize, j: isize) -> bool {
        j <= 0 || j as usize >= self.ny || (!self.periodic && (i <= 0 || i as usize >= self.nx))
    }

    /// Linear form of `φ` at node `(i, j)` in the unknowns.
    fn phi_terms<T: Real>(&self, map: &PermittivityMap<T>, i: isize, j: isize, out: &mut Vec<(usize, T)>) {
        out.clear();
        if self.node_is_boundary(i, j) {
            return;
        }
        let g = &map.grid;
        let nx = self.nx;
        let (iu, ju) = (self.col(i, nx + 1).unwrap_or(0), j as usize);
        let ez = map.eps_z[ju * (nx + 1) + iu];
        let cx = T::one() / (ez * g.dx);
        let cy = T::one() / (ez * g.dy);
        for (di, sign) in [(0isize, T::one()), (-1, -T::one())] {
            if let Some(u) = self.ex(i + di, j) {
                let ic = self.col(i + di, nx).unwrap();
                out.push((u, sign * cx * map.eps_x[ju * nx + ic]));
            }
        }
        for (dj, sign) in [(0isize, T::one()), (-1, -T::one())] {
            if let Some(u) = self.ey(i, j + dj) {
                let jj = (j + dj) as usize;
                out.push((u, sign * cy * map.eps_y[jj * (nx + 1) + iu]));
            }
        }
    }
}

/// Assembles the transverse-E operator for `map`.
pub fn assemble_operator<T: Real>(map: &PermittivityMap<T>) -> Result<Operator<T>> {
    let g = &map.grid;
    if g.nx < MIN_CELLS || g.ny < MIN_CELLS {
        return Err(Error::Config(format!(
            "grid of {} x {} cells is too small (at least {MIN_CELLS} per axis)",
            g.nx, g.ny
        )));
    }
    let periodic = g.lateral == Lateral::Periodic;
    let (st, layout) = Stencil::new(g.nx, g.ny, periodic);
    let k0 = wavenumber(map.lambda_nm);
    let k02 = k0 * k0;
    let (dx, dy) = (g.dx, g.dy);
    let (idx2, idy2, idxy) = (T::one() / (dx * dx), T::one() / (dy * dy), T::one() / (dx * dy));
    let nx = g.nx;
    let mut trip: Vec<(usize, usize, T)> = Vec::with_capacity(st.n * 16);
    let mut phi = Vec::with_capacity(4);

    for j in 0..=g.ny as isize {
        for i in 0..nx as isize {
            let Some(r) = st.ex(i, j) else { continue };
            let ju = j as usize;
            st.phi_terms(map, i + 1, j, &mut phi);
            trip.extend(phi.iter().map(|&(u, c)| (r, u, c / dx)));
            st.phi_terms(map, i, j, &mut phi);
            trip.extend(phi.iter().map(|&(u, c)| (r, u, -c / dx)));
            trip.push((r, r, k02 * map.eps_x[ju * nx + i as usize] - T::lit(2.0) * idy2));
            for dj in [-1, 1] {
                if let Some(u) = st.ex(i, j + dj) {
                    trip.push((r, u, idy2));
                }
            }
            for (di, dj, s) in [(1, 0, -1.0), (0, 0, 1.0), (1, -1, 1.0), (0, -1, -1.0)] {
                if let Some(u) = st.ey(i + di, j + dj) {
                    trip.push((r, u, T::lit(s) * idxy));
                }
            }
        }
    }
    for j in 0..g.ny as isize {
        for i in 0..=nx as isize {
            if periodic && i as usize == nx {
                continue;
            }
            let Some(r) = st.ey(i, j) else { continue };
            let ju = j as usize;
            st.phi_terms(map, i, j + 1, &mut phi);
            trip.extend(phi.iter().map(|&(u, c)| (r, u, c / dy)));
            st.phi_terms(map, i, j, &mut phi);
            trip.extend(phi.iter().map(|&(u, c)| (r, u, -c / dy)));
            trip.push((r, r, k02 * map.eps_y[ju * (nx + 1) + i as usize] - T::lit(2.0) * idx2));
            for di in [-1, 1] {
                if let Some(u) = st.ey(i + di, j) {
                    trip.push((r, u, idx2));
                }
            }
            for (di, dj, s) in [(0, 1, -1.0), (0, 0, 1.0), (-1, 1, 1.0), (-1, 0, -1.0)] {
                if let Some(u) = st.ex(i + di, j + dj) {
                    trip.push((r, u, T::lit(s) * idxy));
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(st.n, st.n, &trip);
    Ok(Operator {
        matrix,
        layout,
        k0,
        stencil: st,
    })
}

impl<T: Real> Operator<T> {
    pub fn n(&self) -> usize {
        self.stencil.n
    }

    /// Eigenpairs `(β², [Ex; Ey])` nearest `shift`, stopping early once
    /// every remaining candidate lies below `floor`.
    pub fn eigenpairs(
        &self,
        shift: T,
        nev: usize,
        floor: Option<T>,
        settings: &ArnoldiSettings<T>,
        residual_scale: T,
    ) -> Result<Vec<EigenPair<T>>> {
        let symbolic = Symbolic::analyze(&self.matrix, &self.layout);
        let lu = SparseLu::factorize(&self.matrix, shift, symbolic)?;
        shift_invert_eigs_above(&self.matrix, &lu, shift, nev, floor, settings, residual_scale)
    }

    /// Scatters an unknown vector into full `Ex`, `Ey` arrays (zeros on walls).
    fn scatter(&self, v: &[T]) -> (Vec<T>, Vec<T>) {
        let st = &self.stencil;
        let pick = |ids: &[Option<usize>]| -> Vec<T> {
            ids.iter().map(|id| id.map_or(T::zero(), |k| v[k])).collect()
        };
        (pick(&st.ex_id), pick(&st.ey_id))
    }
}

/// Builds the fields of eigenpair `(β², v)`, normalized to unit power.
fn reconstruct<T: Real>(op: &Operator<T>, map: &PermittivityMap<T>, beta2: T, v: &[T]) -> (ModeFields<T>, T) {
    let g = &map.grid;
    let st = &op.stencil;
    let (nx, ny) = (g.nx, g.ny);
    let (dx, dy) = (g.dx, g.dy);
    let beta = beta2.sqrt();
    let k0 = op.k0;
    let (ex, ey) = op.scatter(v);

    let mut phi = vec![T::zero(); (nx + 1) * (ny + 1)];
    let mut terms = Vec::with_capacity(4);
    for j in 0..=ny {
        for i in 0..=nx {
            st.phi_terms(map, i as isize, j as isize, &mut terms);
            phi[j * (nx + 1) + i] = terms.iter().map(|&(u, c)| c * v[u]).sum();
        }
    }
    let phi_at = |i: usize, j: usize| phi[j * (nx + 1) + i];
    let c0 = |re: T| Complex::new(re, T::zero());
    let ci = |im: T| Complex::new(T::zero(), im);

    let ez: Vec<Complex<T>> = phi.iter().map(|&p| ci(-p / beta)).collect();
    let bk = beta * k0;
    let mut hy = vec![Complex::default(); nx * (ny + 1)];
    for j in 0..=ny {
        for i in 0..nx {
            let k = j * nx + i;
            let ux = (phi_at(i + 1, j) - phi_at(i, j)) / dx;
            hy[k] = c0((beta2 * ex[k] - ux) / bk);
        }
    }
    let mut hx = vec![Complex::default(); (nx + 1) * ny];
    for j in 0..ny {
        for i in 0..=nx {
            let k = j * (nx + 1) + i;
            let uy = (phi_at(i, j + 1) - phi_at(i, j)) / dy;
            hx[k] = c0((uy - beta2 * ey[k]) / bk);
        }
    }
    let mut hz = vec![Complex::default(); nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let dey = (ey[j * (nx + 1) + i + 1] - ey[j * (nx + 1) + i]) / dx;
            let dex = (ex[(j + 1) * nx + i] - ex[j * nx + i]) / dy;
            hz[j * nx + i] = ci((dey - dex) / k0);
        }
    }
    let mut fields = ModeFields {
        ex: ex.into_iter().map(c0).collect(),
        ey: ey.into_iter().map(c0).collect(),
        ez,
        hx,
        hy,
        hz,
    };
    let p = axial_power(&fields, g);
    fields.scale(c0(T::one() / p.abs().sqrt()));
    let power = axial_power(&fields, g);
    (fields, power)
}

/// `∫ ½ Re(Ex Hy* − Ey Hx*) dA`.
pub fn axial_power<T: Real>(f: &ModeFields<T>, g: &Grid2D<T>) -> T {
    let (nx, ny) = (g.nx, g.ny);
    let mut s = T::zero();
    for k in 0..nx * (ny + 1) {
        s += (f.ex[k] * f.hy[k].conj()).re;
    }
    let ucols = unique_cols(Component::Ey, g);
    for j in 0..ny {
        for i in 0..ucols {
            let k = j * (nx + 1) + i;
            s -= (f.ey[k] * f.hx[k].conj()).re;
        }
    }
    T::lit(0.5) * s * g.dx * g.dy
}

fn sum_sq<T: Real>(arr: &[Complex<T>], cols: usize, rows: usize, ucols: usize) -> T {
    let mut s = T::zero();
    for j in 0..rows {
        for i in 0..ucols {
            s += arr[j * cols + i].norm_sqr();
        }
    }
    s
}

fn polarization_fraction<T: Real>(f: &ModeFields<T>, g: &Grid2D<T>) -> T {
    let (nx, ny) = (g.nx, g.ny);
    let sx = sum_sq(&f.ex, nx, ny + 1, nx);
    let sy = sum_sq(&f.ey, nx + 1, ny, unique_cols(Component::Ey, g));
    if sx + sy > T::zero() {
        sy / (sx + sy)
    } else {
        T::zero()
    }
}

/// Fraction of `∫ ε|E|² dA` at samples inside the slot.
fn slot_confinement<T: Real>(f: &ModeFields<T>, map: &PermittivityMap<T>) -> T {
    let g = &map.grid;
    let cs = &map.cross_section;
    if cs.is_degenerate() {
        return T::zero();
    }
    let slot = cs.slot_rect();
    let (nx, ny) = (g.nx, g.ny);
    let (mut inside, mut total) = (T::zero(), T::zero());
    for (c, eps, arr) in [
        (Component::Ex, &map.eps_x, &f.ex),
        (Component::Ey, &map.eps_y, &f.ey),
        (Component::Ez, &map.eps_z, &f.ez),
    ] {
        let (cols, rows) = c.dims(nx, ny);
        let (sx, sy) = c.offset();
        for j in 0..rows {
            let y = g.y_at(j, T::lit(sy));
            for i in 0..unique_cols(c, g) {
                let k = j * cols + i;
                let e = eps[k] * arr[k].norm_sqr();
                total += e;
                if slot.contains(g.x_at(i, T::lit(sx)), y) {
                    inside += e;
                }
            }
        }
    }
    if total > T::zero() {
        inside / total
    } else {
        T::zero()
    }
}

/// Largest transverse field magnitude on the sample rows and columns next to
/// the walls, relative to the peak.
pub fn boundary_ratio<T: Real>(f: &ModeFields<T>, g: &Grid2D<T>) -> T {
    let (nx, ny) = (g.nx, g.ny);
    let mut peak = T::zero();
    let mut edge = T::zero();
    let pec = g.lateral == Lateral::Pec;
    for j in 0..=ny {
        for i in 0..nx {
            let a = f.ex[j * nx + i].norm();
            peak = peak.max(a);
            if j == 1 || j + 1 == ny || (pec && (i == 0 || i + 1 == nx)) {
                edge = edge.max(a);
            }
        }
    }
    for j in 0..ny {
        for i in 0..=nx {
            let a = f.ey[j * (nx + 1) + i].norm();
            peak = peak.max(a);
            if j == 0 || j + 1 == ny || (pec && (i == 1 || i + 1 == nx)) {
                edge = edge.max(a);
            }
        }
    }
    if peak > T::zero() {
        edge / peak
    } else {
        T::zero()
    }
}

/// Raw eigenpairs near `(n_shift k0)²` without mode filtering or checks.
pub fn eigenpairs<T: Real>(
    map: &PermittivityMap<T>,
    n_shift: T,
    nev: usize,
    settings: &ArnoldiSettings<T>,
) -> Result<Vec<EigenPair<T>>> {
    let op = assemble_operator(map)?;
    let k0 = op.k0;
    let scale = (map.max_eps().sqrt() * k0).powi(2);
    op.eigenpairs((n_shift * k0).powi(2), nev, None, settings, scale)
}

struct RawSolve<T> {
    op: Operator<T>,
    pairs: Vec<EigenPair<T>>,
}

fn raw_solve<T: Real>(req: &SolveRequest<T>, nev: usize, guess: T) -> Result<RawSolve<T>> {
    let op = assemble_operator(&req.map)?;
    let n_rail = req.map.rail_index()?;
    let k0 = op.k0;
    let scale = (n_rail * k0).powi(2);
    let floor = (req.map.background_index()? * k0).powi(2);
    let pairs = op.eigenpairs((guess * k0).powi(2), nev, Some(floor), &req.settings.arnoldi, scale)?;
    Ok(RawSolve { op, pairs })
}

/// Guided modes sorted by descending `n_eff`; an empty list means no
/// guided mode exists near the shift.
pub fn solve_modes<T: Real>(req: &SolveRequest<T>) -> Result<Vec<Mode<T>>> {
    Ok(solve_listed(req)?.0)
}

/// Guided modes plus the boundary ratio and `n_eff` of the first mode
/// dropped by the padding check, if any.
fn solve_listed<T: Real>(req: &SolveRequest<T>) -> Result<(Vec<Mode<T>>, Option<(T, T)>)> {
    req.validate()?;
    let guess = req.guess()?;
    let raw = raw_solve(req, req.n_modes, guess)?;
    build_modes(req, &raw)
}

fn build_modes<T: Real>(req: &SolveRequest<T>, raw: &RawSolve<T>) -> Result<(Vec<Mode<T>>, Option<(T, T)>)> {
    let map = &req.map;
    let lam = map.lambda_nm;
    let k0 = raw.op.k0;
    let n_rail = map.rail_index()?;
    let n_bg = map.background_index()?;
    let mut modes = Vec::new();
    let mut cut = None;
    let mut pairs: Vec<&EigenPair<T>> = raw.pairs.iter().collect();
    pairs.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap_or(std::cmp::Ordering::Equal));
    for p in pairs {
        if !(p.value > T::zero()) {
            continue;
        }
        let n_eff = p.value.sqrt() / k0;
        if !(n_eff > n_bg && n_eff < n_rail) {
            continue;
        }
        let (fields, power) = reconstruct(&raw.op, map, p.value, &p.vector);
        let ratio = boundary_ratio(&fields, &map.grid);
        if ratio > req.settings.boundary_ratio {
            // Modes below a poorly confined one decay even more slowly.
            if !modes.is_empty() {
                cut = Some((ratio, n_eff));
                break;
            }
            return Err(Error::InsufficientPadding {
                ratio: ratio.to_f64_lossy(),
                limit: req.settings.boundary_ratio.to_f64_lossy(),
                n_eff: n_eff.to_f64_lossy(),
            });
        }
        modes.push(Mode {
            id: 0,
            lambda_nm: lam,
            n_eff,
            n_g: None,
            power,
            pol_fraction_y: polarization_fraction(&fields, &map.grid),
            gamma_slot: slot_confinement(&fields, map),
            residual: p.residual,
            fields,
            map: map.clone(),
        });
    }
    sort_modes(&mut modes);
    Ok((modes, cut))
}

fn sort_modes<T: Real>(modes: &mut [Mode<T>]) {
    let tie = T::lit(1e-6);
    modes.sort_by(|a, b| {
        if (a.n_eff - b.n_eff).abs() < tie {
            b.pol_fraction_y
                .partial_cmp(&a.pol_fraction_y)
                .unwrap_or(std::cmp::Ordering::Equal)
        } else {
            b.n_eff.partial_cmp(&a.n_eff).unwrap_or(std::cmp::Ordering::Equal)
        }
    });
    for (k, m) in modes.iter_mut().enumerate() {
        m.id = k;
    }
}

/// The highest-index mode whose transverse field is mostly `Ey`.
pub fn slot_mode<T: Real>(modes: &[Mode<T>]) -> Option<&Mode<T>> {
    modes.iter().find(|m| m.pol_fraction_y >= T::lit(0.5))
}

/// Solves for the slot mode, enlarging the number of requested modes until
/// a mostly-`Ey` guided mode appears or the guided spectrum is exhausted.
pub fn find_slot_mode<T: Real>(req: &SolveRequest<T>) -> Result<Mode<T>> {
    let mut r = req.clone();
    r.n_modes = req.n_modes.max(3);
    loop {
        let (modes, cut) = solve_listed(&r)?;
        if let Some(m) = slot_mode(&modes) {
            return Ok(m.clone());
        }
        if let Some((ratio, n_eff)) = cut {
            return Err(Error::InsufficientPadding {
                ratio: ratio.to_f64_lossy(),
                limit: req.settings.boundary_ratio.to_f64_lossy(),
                n_eff: n_eff.to_f64_lossy(),
            });
        }
        if modes.len() < r.n_modes || r.n_modes >= 24 {
            return Err(Error::NoGuidedMode {
                lambda_nm: req.map.lambda_nm.to_f64_lossy(),
            });
        }
        r.n_modes *= 2;
    }
}

/// Ratio of mean `|Ey|` on the slot's central `Ey` row to mean `|Ey|` on
/// the rail row one cell above the upper interface, over columns inside the
/// waveguide width.
pub fn slot_enhancement<T: Real>(mode: &Mode<T>) -> T {
    let g = mode.grid();
    let cs = &mode.map.cross_section;
    let (cols, rows) = Component::Ey.dims(g.nx, g.ny);
    let half = T::lit(0.5);
    let row_near = |y: T| -> usize {
        let k = ((y - g.origin.1) / g.dy - half).round();
        k.max(T::zero()).to_usize().unwrap_or(0).min(rows - 1)
    };
    let mean_row = |j: usize| -> T {
        let (mut s, mut n) = (T::zero(), T::zero());
        for i in 0..cols {
            if g.x_at(i, T::zero()).abs() < cs.width_nm * half {
                s += mode.fields.ey[j * cols + i].norm();
                n += T::one();
            }
        }
        s / n
    };
    mean_row(row_near(T::zero())) / mean_row(row_near(cs.slot_nm * half + g.dy))
}

/// Jump of `|Ey|` across the upper slot interface near the axis.
///
/// Each side is extrapolated linearly to the interface from the two nearest
/// `Ey` rows lying at least half a cell away from it, averaged over columns
/// with `|x| ≤ w/4`. For a flat interface the ratio tends to `ε_rail/ε_slot`.
pub fn interface_jump<T: Real>(mode: &Mode<T>) -> T {
    let g = mode.grid();
    let cs = &mode.map.cross_section;
    let (cols, rows) = Component::Ey.dims(g.nx, g.ny);
    let half = T::lit(0.5);
    let yi = cs.slot_nm * half;
    let ys: Vec<T> = (0..rows).map(|j| g.y_at(j, half)).collect();
    let below: Vec<usize> = (0..rows).filter(|&j| ys[j] <= yi - g.dy * half).collect();
    let above: Vec<usize> = (0..rows).filter(|&j| ys[j] >= yi + g.dy * half).collect();
    if below.len() < 2 || above.len() < 2 {
        return T::nan();
    }
    let (s1, s2) = (below[below.len() - 1], below[below.len() - 2]);
    let (r1, r2) = (above[0], above[1]);
    let extrap = |i: usize, a: usize, b: usize| -> T {
        let (fa, fb) = (mode.fields.ey[a * cols + i].norm(), mode.fields.ey[b * cols + i].norm());
        fa + (fa - fb) * (yi - ys[a]) / (ys[a] - ys[b])
    };
    let (mut num, mut den) = (T::zero(), T::zero());
    for i in 0..cols {
        if g.x_at(i, T::zero()).abs() <= cs.width_nm / T::lit(4.0) {
            num += extrap(i, s1, s2);
            den += extrap(i, r1, r2);
        }
    }
    num / den
}

/// Overlap threshold used to follow a mode across wavelengths.
pub const TRACKING_THRESHOLD: f64 = 0.9;

fn overlap<T: Real>(a: &[T], b: &[T]) -> T {
    let ab: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let aa: T = a.iter().map(|&x| x * x).sum();
    let bb: T = b.iter().map(|&x| x * x).sum();
    ab.abs() / (aa * bb).sqrt()
}

/// Fills `n_g` on every mode by central differences over `λ ± δλ`, following
/// each mode by transverse-field overlap.
pub fn attach_group_indices<T: Real>(req: &SolveRequest<T>, modes: &mut [Mode<T>], dl_nm: T) -> Result<()> {
    if modes.is_empty() {
        return Ok(());
    }
    if !(dl_nm > T::zero()) {
        return Err(Error::Config(format!("wavelength step must be positive, got {dl_nm}")));
    }
    let lam = req.map.lambda_nm;
    // Shift at the highest tracked mode; the targets are the nearest pairs.
    let guess = modes.iter().map(|m| m.n_eff).fold(T::neg_infinity(), T::max);
    let ids = modes.iter().map(|m| m.id);
    let span = ids.clone().max().unwrap_or(0) - ids.min().unwrap_or(0);
    let nev = span + 3;
    let base_op = assemble_operator(&req.map)?;
    let base_vecs: Vec<Vec<T>> = modes.iter().map(|m| transverse_unknowns(&base_op, m)).collect();
    let mut shifted = Vec::with_capacity(2);
    for l in [lam + dl_nm, lam - dl_nm] {
        let mut r = req.clone();
        r.map = req.map.resample(l)?;
        let raw = raw_solve(&r, nev, guess)?;
        let k0 = raw.op.k0;
        let mut picks = Vec::with_capacity(modes.len());
        for v in &base_vecs {
            let best = raw
                .pairs
                .iter()
                .map(|p| (overlap(v, &p.vector), p.value))
                .fold((T::zero(), T::zero()), |acc, x| if x.0 > acc.0 { x } else { acc });
            if best.0 < T::lit(TRACKING_THRESHOLD) {
                return Err(Error::ModeTracking {
                    overlap: best.0.to_f64_lossy(),
                    threshold: TRACKING_THRESHOLD,
                });
            }
            picks.push(best.1.max(T::zero()).sqrt() / k0);
        }
        shifted.push(picks);
    }
    for (k, m) in modes.iter_mut().enumerate() {
        let (np, nm) = (shifted[0][k], shifted[1][k]);
        m.n_g = Some(m.n_eff - lam * (np - nm) / (T::lit(2.0) * dl_nm));
    }
    Ok(())
}

/// Group index of mode `target` of `req` (index into the sorted solve result).
pub fn group_index<T: Real>(req: &SolveRequest<T>, target: usize, dl_nm: T) -> Result<T> {
    let mut modes = solve_modes(req)?;
    if target >= modes.len() {
        return Err(Error::NoGuidedMode {
            lambda_nm: req.map.lambda_nm.to_f64_lossy(),
        });
    }
    let mut one = vec![modes.swap_remove(target)];
    attach_group_indices(req, &mut one, dl_nm)?;
    Ok(one[0].n_g.unwrap_or(T::nan()))
}

/// Solves and attaches group indices in one call.
pub fn solve_with_group_index<T: Real>(req: &SolveRequest<T>, dl_nm: T) -> Result<Vec<Mode<T>>> {
    let mut modes = solve_modes(req)?;
    attach_group_indices(req, &mut modes, dl_nm)?;
    Ok(modes)
}

fn transverse_unknowns<T: Real>(op: &Operator<T>, m: &Mode<T>) -> Vec<T> {
    let st = &op.stencil;
    let mut v = vec![T::zero(); st.n];
    for (k, id) in st.ex_id.iter().enumerate() {
        if let Some(u) = id {
            v[*u] = m.fields.ex[k].re;
        }
    }
    for (k, id) in st.ey_id.iter().enumerate() {
        if let Some(u) = id {
            v[*u] = m.fields.ey[k].re;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rasterize, CrossSection};
    use crate::materials::{MaterialDatabase, MaterialModel};

    fn uniform_map(eps: f64, nx: usize, ny: usize, h: f64, lambda: f64) -> PermittivityMap<f64> {
        let bg = MaterialModel::constant("bg", eps.sqrt()).unwrap();
        let cs = CrossSection::uniform(bg);
        let grid = Grid2D {
            dx: h,
            dy: h,
            nx,
            ny,
            origin: (0.0, 0.0),
            padding_nm: 0.0,
            lateral: Lateral::Pec,
        };
        rasterize(&cs, &grid, lambda).unwrap()
    }

    #[test]
    fn stencil_row_sums_on_constant_vector() {
        let (h, lam, eps) = (10.0, 1000.0, 2.25);
        let op = assemble_operator(&uniform_map(eps, 8, 8, h, lam)).unwrap();
        let k02 = wavenumber(lam).powi(2);
        let st = &op.stencil;
        let ones = vec![1.0; op.n()];
        let y = op.matrix.mul_vec(&ones);
        let tol = 1e-15;
        // Interior rows see only the mass term.
        assert!((y[st.ex(3, 4).unwrap()] - k02 * eps).abs() < tol);
        assert!((y[st.ey(4, 3).unwrap()] - k02 * eps).abs() < tol);
        // Rows next to a wall lose one neighbour of the second difference.
        assert!((y[st.ex(3, 1).unwrap()] - (k02 * eps - 1.0 / (h * h))).abs() < tol);
        assert!((y[st.ey(1, 3).unwrap()] - (k02 * eps - 1.0 / (h * h))).abs() < tol);
        assert!((y[st.ex(0, 1).unwrap()] - (k02 * eps - 1.0 / (h * h))).abs() < tol);
        assert!(op.matrix.max_row_nnz() <= 18);
    }

    #[test]
    fn too_small_grid_is_config_error() {
        let m = uniform_map(1.0, 7, 20, 10.0, 1000.0);
        assert!(matches!(assemble_operator(&m), Err(Error::Config(_))));
    }

    #[test]
    fn periodic_layout_wraps() {
        let (st, _) = Stencil::new(8, 10, true);
        assert_eq!(st.ex(-1, 3), st.ex(7, 3));
        assert_eq!(st.ey(8, 3), st.ey(0, 3));
        assert_eq!(st.n, 8 * 9 + 8 * 10);
    }

    #[test]
    fn gap_slot_mode_is_y_polarized_and_normalized() {
        let db = MaterialDatabase::builtin();
        let cs = CrossSection::new(&db, "GaP", 400.0, 350.0, 50.0).unwrap();
        let grid = Grid2D::around(&cs, 20.0, 20.0, 400.0).unwrap();
        let map = rasterize(&cs, &grid, 750.0).unwrap();
        let mut req = SolveRequest::new(map, 3);
        req.settings.boundary_ratio = 1e-2;
        let modes: Vec<Mode<f64>> = solve_modes(&req).unwrap();
        assert!(!modes.is_empty());
        for w in modes.windows(2) {
            assert!(w[0].n_eff >= w[1].n_eff - 1e-6);
        }
        let m = slot_mode(&modes).unwrap();
        assert!(m.pol_fraction_y > 0.8, "pol {}", m.pol_fraction_y);
        assert!((m.power - 1.0).abs() < 1e-9);
        assert!(m.gamma_slot > 0.0 && m.gamma_slot < 1.0);
        assert!(m.residual < 1e-8);
    }
}
