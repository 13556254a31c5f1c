//! Dipole coupling to a guided mode: guided-rate factor, β and Purcell factor.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Lateral;
use crate::modesolver::{Component, Mode};
use crate::scalar::Real;

/// Principal dipole orientations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn unit<T: Real>(self) -> [T; 3] {
        let (o, z) = (T::one(), T::zero());
        match self {
            Axis::X => [o, z, z],
            Axis::Y => [z, o, z],
            Axis::Z => [z, z, o],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// Point dipole in the cross-section plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleSpec<T> {
    pub position_nm: (T, T),
    pub orientation: [T; 3],
    pub lambda_nm: T,
}

impl<T: Real> DipoleSpec<T> {
    pub fn new(position_nm: (T, T), orientation: [T; 3], lambda_nm: T) -> Result<Self> {
        let norm = orientation.iter().map(|&u| u * u).sum::<T>().sqrt();
        if !((norm - T::one()).abs() <= T::lit(1e-9).max(T::epsilon() * T::lit(10.0))) {
            return Err(Error::Domain(format!("dipole orientation has norm {norm}, expected 1")));
        }
        Ok(DipoleSpec {
            position_nm,
            orientation,
            lambda_nm,
        })
    }

    pub fn along(position_nm: (T, T), axis: Axis, lambda_nm: T) -> Self {
        DipoleSpec {
            position_nm,
            orientation: axis.unit(),
            lambda_nm,
        }
    }
}

/// Model constants for the emission budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingModel<T> {
    /// Emission into non-guided channels relative to the bulk rate.
    pub f_bg: T,
}

impl<T: Real> Default for CouplingModel<T> {
    fn default() -> Self {
        CouplingModel { f_bg: T::one() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingResult<T> {
    pub position_nm: (T, T),
    pub orientation: [T; 3],
    pub lambda_nm: T,
    pub f_wg: T,
    pub f_bg: T,
    pub f_p: T,
    pub beta: T,
    pub mode_id: usize,
}

/// Bilinear interpolation of component `c` at `(x, y)`.
pub fn interpolate<T: Real>(mode: &Mode<T>, c: Component, x: T, y: T) -> Result<Complex<T>> {
    let g = mode.grid();
    let (cols, rows) = c.dims(g.nx, g.ny);
    let (sx, sy) = c.offset();
    let (sx, sy) = (T::lit(sx), T::lit(sy));
    // Fractional sample indices, measured from the window centre as in `x_at`.
    let half_nx = T::from_usize_lossy(g.nx) / T::lit(2.0);
    let x_mid = g.origin.0 + half_nx * g.dx;
    let fx = (x - x_mid) / g.dx + half_nx - sx;
    let fy = (y - g.origin.1) / g.dy - sy;
    let periodic = g.lateral == Lateral::Periodic;
    let span_x = T::from_usize_lossy(g.nx);
    let inside_x = periodic || (fx >= -sx && fx <= span_x - sx);
    let inside_y = fy >= -sy && fy <= T::from_usize_lossy(g.ny) - sy;
    if !(inside_x && inside_y) {
        return Err(Error::Domain(format!("point ({x}, {y}) nm lies outside the grid window")));
    }
    let data = mode.fields.component(c);
    let clamp = |f: T, n: usize| -> (usize, usize, T) {
        let f = f.max(T::zero()).min(T::from_usize_lossy(n - 1));
        let i0 = f.floor().to_usize().unwrap_or(0).min(n.saturating_sub(2));
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, f - T::from_usize_lossy(i0))
    };
    let (i0, i1, tx) = if periodic {
        let n = g.nx;
        let f = fx - (fx / span_x).floor() * span_x;
        let i0 = f.floor().to_usize().unwrap_or(0) % n;
        (i0, (i0 + 1) % n, f - f.floor())
    } else {
        clamp(fx, cols)
    };
    let (j0, j1, ty) = clamp(fy, rows);
    let at = |i: usize, j: usize| data[j * cols + i];
    let one = T::one();
    Ok(at(i0, j0) * ((one - tx) * (one - ty))
        + at(i1, j0) * (tx * (one - ty))
        + at(i0, j1) * ((one - tx) * ty)
        + at(i1, j1) * (tx * ty))
}

/// Electric field of `mode` at `(x, y)`.
pub fn field_at<T: Real>(mode: &Mode<T>, x: T, y: T) -> Result<[Complex<T>; 3]> {
    Ok([
        interpolate(mode, Component::Ex, x, y)?,
        interpolate(mode, Component::Ey, x, y)?,
        interpolate(mode, Component::Ez, x, y)?,
    ])
}

fn check_lambda<T: Real>(mode: &Mode<T>, dip: &DipoleSpec<T>) -> Result<()> {
    let tol = T::lit(1e-9) * mode.lambda_nm;
    if (mode.lambda_nm - dip.lambda_nm).abs() > tol {
        return Err(Error::WavelengthMismatch {
            mode_nm: mode.lambda_nm.to_f64_lossy(),
            dipole_nm: dip.lambda_nm.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Emission rate into `mode` (both directions) relative to the bulk rate in
/// a medium of index `n_local`:
/// `F_wg = 3 λ² n_g |û·E(r₀)|² / (4π n_local ∫ ε_r |E|² dA)`.
pub fn guided_rate_factor<T: Real>(mode: &Mode<T>, dip: &DipoleSpec<T>, n_local: T) -> Result<T> {
    check_lambda(mode, dip)?;
    let n_g = mode
        .n_g
        .ok_or_else(|| Error::MissingInput("group index of the target mode".into()))?;
    let (x, y) = dip.position_nm;
    let e = field_at(mode, x, y)?;
    let u = dip.orientation;
    let proj = e[0] * u[0] + e[1] * u[1] + e[2] * u[2];
    let lam = dip.lambda_nm;
    let pref = T::lit(3.0) * lam * lam * n_g / (T::lit(4.0) * T::PI() * n_local);
    Ok(pref * proj.norm_sqr() / mode.electric_energy())
}

/// Index of the medium hosting the dipole (the slot material).
pub fn local_index<T: Real>(mode: &Mode<T>) -> Result<T> {
    mode.map.cross_section.slot_material.refractive_index(mode.lambda_nm)
}

pub fn coupling_with<T: Real>(mode: &Mode<T>, dip: &DipoleSpec<T>, model: &CouplingModel<T>) -> Result<CouplingResult<T>> {
    let f_wg = guided_rate_factor(mode, dip, local_index(mode)?)?;
    Ok(CouplingResult {
        position_nm: dip.position_nm,
        orientation: dip.orientation,
        lambda_nm: dip.lambda_nm,
        f_wg,
        f_bg: model.f_bg,
        f_p: f_wg + model.f_bg,
        beta: f_wg / (f_wg + model.f_bg),
        mode_id: mode.id,
    })
}

/// Coupling under the default model (`F_bg = 1`).
pub fn coupling_at<T: Real>(mode: &Mode<T>, dip: &DipoleSpec<T>) -> Result<CouplingResult<T>> {
    coupling_with(mode, dip, &CouplingModel::default())
}

/// Coupling along the monolayer plane at relative displacements `u`
/// (`0` on axis, `±1` at the waveguide edges).
pub fn displacement_sweep<T: Real>(
    mode: &Mode<T>,
    u_samples: &[T],
    orientation: [T; 3],
    model: &CouplingModel<T>,
) -> Result<Vec<(T, CouplingResult<T>)>> {
    if u_samples.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("displacement samples must be strictly increasing".into()));
    }
    let cs = &mode.map.cross_section;
    u_samples
        .par_iter()
        .map(|&u| {
            let pos = cs.displacement_to_coords(u)?;
            let dip = DipoleSpec::new(pos, orientation, mode.lambda_nm)?;
            Ok((u, coupling_with(mode, &dip, model)?))
        })
        .collect()
}

/// Coupling for the three principal orientations at one position.
pub fn orientation_table<T: Real>(
    mode: &Mode<T>,
    position_nm: (T, T),
    model: &CouplingModel<T>,
) -> Result<[CouplingResult<T>; 3]> {
    let row = |a: Axis| coupling_with(mode, &DipoleSpec::along(position_nm, a, mode.lambda_nm), model);
    Ok([row(Axis::X)?, row(Axis::Y)?, row(Axis::Z)?])
}

/// Writes displacement-sweep rows as CSV with columns
/// `u, x_nm, beta, F_wg, F_P, mode_id, lambda_nm`.
pub fn write_displacement_csv<T: Real, W: std::io::Write>(rows: &[(T, CouplingResult<T>)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u", "x_nm", "beta", "F_wg", "F_P", "mode_id", "lambda_nm"])?;
    for (u, r) in rows {
        w.write_record([
            u.to_f64_lossy().to_string(),
            r.position_nm.0.to_f64_lossy().to_string(),
            r.beta.to_f64_lossy().to_string(),
            r.f_wg.to_f64_lossy().to_string(),
            r.f_p.to_f64_lossy().to_string(),
            r.mode_id.to_string(),
            r.lambda_nm.to_f64_lossy().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
