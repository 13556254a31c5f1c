//! Slot-waveguide cross-section and its rasterization onto a staggered grid.
//!
//! Coordinates are in nm with the optical axis at `x = 0` and the slot
//! center at `y = 0`. The stack is: substrate half-space below the lower
//! rail, cladding everywhere else outside the rails and slot.
//!
//! Staggered sample positions for cell/node indices `(i, j)`:
//!
//! | array | x              | y              | shape              |
//! |-------|----------------|----------------|--------------------|
//! | `Ex`  | `(i + ½)·dx`   | `j·dy`         | `nx × (ny + 1)`    |
//! | `Ey`  | `i·dx`         | `(j + ½)·dy`   | `(nx + 1) × ny`    |
//! | `Ez`  | `i·dx`         | `j·dy`         | `(nx + 1) × (ny + 1)` |
//!
//! (offsets relative to the window origin). Arrays are row-major with `x`
//! varying fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::{MaterialDatabase, MaterialModel};
use crate::scalar::Real;

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub x0: T,
    pub x1: T,
    pub y0: T,
    pub y1: T,
}

impl<T: Real> Rect<T> {
    pub fn area(&self) -> T {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, x: T, y: T) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Largest spacing `≤ d` (and `≥ d/2`) dividing both `a` and `b` (`b = 0`
/// is ignored); `d` itself when none exists or `a` is not finite.
fn conforming_spacing<T: Real>(d: T, a: T, b: T) -> T {
    if !(a.is_finite() && a > T::zero() && b.is_finite()) {
        return d;
    }
    let tol = T::lit(1e-9);
    let is_int = |v: T| (v - v.round()).abs() <= tol * v.abs().max(T::one());
    let first = (a / d - tol).ceil().max(T::one());
    let mut m = first;
    while m <= T::lit(2.0) * first {
        let s = a / m;
        if b == T::zero() || is_int(b / s) {
            return s;
        }
        m += T::one();
    }
    d
}

/// True when an interface at `±half` lies nearer to the samples of a grid
/// centred on a sample than to those of a grid centred on a node.
fn sample_centred<T: Real>(half: T, d: T) -> bool {
    if !half.is_finite() {
        return false;
    }
    let r = (half / d).fract();
    r.min(T::one() - r) < (r - T::lit(0.5)).abs()
}

#[inline]
fn overlap<T: Real>(a0: T, a1: T, b0: T, b1: T) -> T {
    (a1.min(b1) - a0.max(b0)).max(T::zero())
}

/// Parametric horizontal slot waveguide.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection<T> {
    pub rail_material: MaterialModel,
    pub width_nm: T,
    pub height_nm: T,
    pub slot_nm: T,
    pub slot_material: MaterialModel,
    pub substrate_material: MaterialModel,
    pub cladding_material: MaterialModel,
    /// Height of the embedded monolayer plane above the slot center. Purely
    /// geometric: it marks where dipoles sit and has no optical thickness.
    pub monolayer_offset_nm: T,
}

impl<T: Real> CrossSection<T> {
    /// Slot waveguide with the default stack: SiO₂ slot and substrate, air cladding.
    pub fn new(
        db: &MaterialDatabase,
        rail_material: &str,
        width_nm: T,
        height_nm: T,
        slot_nm: T,
    ) -> Result<Self> {
        let cs = CrossSection {
            rail_material: db.get(rail_material)?.clone(),
            width_nm,
            height_nm,
            slot_nm,
            slot_material: db.get("SiO2")?.clone(),
            substrate_material: db.get("SiO2")?.clone(),
            cladding_material: db.get("air")?.clone(),
            monolayer_offset_nm: T::zero(),
        };
        cs.validate()?;
        Ok(cs)
    }

    /// Degenerate cross-section with no waveguide: the whole window is `background`.
    pub fn uniform(background: MaterialModel) -> Self {
        CrossSection {
            rail_material: background.clone(),
            width_nm: T::zero(),
            height_nm: T::zero(),
            slot_nm: T::zero(),
            slot_material: background.clone(),
            substrate_material: background.clone(),
            cladding_material: background,
            monolayer_offset_nm: T::zero(),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.width_nm == T::zero() && self.height_nm == T::zero() && self.slot_nm == T::zero()
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_degenerate() {
            return Ok(());
        }
        let (w, h, t) = (self.width_nm, self.height_nm, self.slot_nm);
        if !(w > T::zero()) {
            return Err(Error::Geometry(format!("width must be positive, got {w}")));
        }
        if !(t > T::zero() && t < h && h.is_finite()) {
            return Err(Error::Geometry(format!(
                "need 0 < slot ({t}) < height ({h})"
            )));
        }
        let off = self.monolayer_offset_nm;
        if off.abs() > t / T::lit(2.0) {
            return Err(Error::Geometry(format!(
                "monolayer offset {off} nm lies outside the {t} nm slot"
            )));
        }
        Ok(())
    }

    /// Thickness of each rail, `(h − t_slot)/2`.
    pub fn rail_thickness(&self) -> T {
        (self.height_nm - self.slot_nm) / T::lit(2.0)
    }

    pub fn slot_rect(&self) -> Rect<T> {
        let two = T::lit(2.0);
        Rect {
            x0: -self.width_nm / two,
            x1: self.width_nm / two,
            y0: -self.slot_nm / two,
            y1: self.slot_nm / two,
        }
    }

    pub fn lower_rail_rect(&self) -> Rect<T> {
        let two = T::lit(2.0);
        Rect {
            x0: -self.width_nm / two,
            x1: self.width_nm / two,
            y0: -self.height_nm / two,
            y1: -self.slot_nm / two,
        }
    }

    pub fn upper_rail_rect(&self) -> Rect<T> {
        let two = T::lit(2.0);
        Rect {
            x0: -self.width_nm / two,
            x1: self.width_nm / two,
            y0: self.slot_nm / two,
            y1: self.height_nm / two,
        }
    }

    /// Materials that must be valid at a given wavelength.
    pub fn materials(&self) -> [&MaterialModel; 4] {
        [
            &self.rail_material,
            &self.slot_material,
            &self.substrate_material,
            &self.cladding_material,
        ]
    }

    /// Maps a relative displacement `u ∈ [−1, 1]` to a position on the
    /// monolayer plane: `0` is the optical axis, `±1` the waveguide edges.
    pub fn displacement_to_coords(&self, u: T) -> Result<(T, T)> {
        if !(u.abs() <= T::one()) {
            return Err(Error::Domain(format!("relative displacement {u} outside [-1, 1]")));
        }
        Ok((u * self.width_nm / T::lit(2.0), self.monolayer_offset_nm))
    }
}

/// Treatment of the left/right window edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lateral {
    /// Perfect electric conductor walls.
    #[default]
    Pec,
    /// Periodic wrap in `x`; used for laterally uniform (quasi-1D) stacks.
    Periodic,
}

/// Uniform computational window; `nx`, `ny` count cells, so there are
/// `nx + 1` node columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D<T> {
    pub dx: T,
    pub dy: T,
    pub nx: usize,
    pub ny: usize,
    /// Physical coordinate of node `(0, 0)`, the lower-left window corner.
    pub origin: (T, T),
    pub padding_nm: T,
    pub lateral: Lateral,
}

impl<T: Real> Grid2D<T> {
    /// Smallest window with at least `padding_nm` of background on every
    /// side of the waveguide, mirror-symmetric about `x = 0` and `y = 0`.
    ///
    /// `dx` and `dy` are upper bounds: each is reduced (by at most half) to
    /// the largest spacing that divides the width, respectively the slot and
    /// rail thicknesses, so every interface falls on a sample of the normal
    /// field component.
    ///
    /// Along each axis the window is centred either on a node or on a sample
    /// of the normal field component (`Ex` columns, `Ey` rows), whichever
    /// puts the sidewalls (`x`) and slot interfaces (`y`) closer to those
    /// samples, where the smoothed permittivity is most accurate.
    pub fn around(cs: &CrossSection<T>, dx: T, dy: T, padding_nm: T) -> Result<Self> {
        if !(dx > T::zero() && dy > T::zero()) {
            return Err(Error::Config(format!("grid spacing must be positive ({dx}, {dy})")));
        }
        if !(padding_nm > T::zero()) {
            return Err(Error::Config(format!("padding must be positive, got {padding_nm}")));
        }
        let two = T::lit(2.0);
        let half = T::lit(0.5);
        let (dx, dy) = if cs.is_degenerate() {
            (dx, dy)
        } else {
            (
                conforming_spacing(dx, cs.width_nm, T::zero()),
                conforming_spacing(dy, cs.slot_nm, cs.rail_thickness()),
            )
        };
        let half_w = cs.width_nm / two + padding_nm;
        let nx = if sample_centred(cs.width_nm / two, dx) {
            2 * (half_w / dx - half).ceil().to_usize().unwrap_or(0).max(4) + 1
        } else {
            2 * (half_w / dx).ceil().to_usize().unwrap_or(0).max(4)
        };
        let reach = (cs.height_nm / two + padding_nm) / dy;
        let (y0, ny) = if sample_centred(cs.slot_nm / two, dy) {
            let k = (reach - half).ceil();
            ((-k - half) * dy, 2 * k.to_usize().unwrap_or(0) + 1)
        } else {
            let k = reach.ceil();
            (-k * dy, 2 * k.to_usize().unwrap_or(0))
        };
        let grid = Grid2D {
            dx,
            dy,
            nx,
            ny,
            origin: (-T::from_usize_lossy(nx) * dx / two, y0),
            padding_nm,
            lateral: Lateral::Pec,
        };
        grid.check_contains(cs)?;
        Ok(grid)
    }

    /// Narrow window, periodic in `x`, for laterally uniform stacks
    /// (`cs.width_nm` infinite); `nx` columns of width `dx`.
    pub fn slab(cs: &CrossSection<T>, dx: T, dy: T, padding_nm: T, nx: usize) -> Result<Self> {
        let mut probe = cs.clone();
        probe.width_nm = T::zero();
        let mut grid = Self::around(&CrossSection { width_nm: dx, ..probe }, dx, dy, padding_nm)?;
        grid.nx = nx;
        grid.origin.0 = -T::from_usize_lossy(nx) * dx / T::lit(2.0);
        grid.lateral = Lateral::Periodic;
        grid.check_contains(cs)?;
        Ok(grid)
    }

    pub fn width(&self) -> T {
        T::from_usize_lossy(self.nx) * self.dx
    }

    pub fn height(&self) -> T {
        T::from_usize_lossy(self.ny) * self.dy
    }

    /// `x` of the window center, exact for windows built by [`Grid2D::around`].
    fn x_mid(&self) -> T {
        self.origin.0 + T::from_usize_lossy(self.nx) * self.dx / T::lit(2.0)
    }

    /// `x` coordinate of a sample at fractional column `i + shift`, written as
    /// an offset from the window center so mirrored samples are exact negatives.
    #[inline]
    pub fn x_at(&self, i: usize, shift: T) -> T {
        let half = T::from_usize_lossy(self.nx) / T::lit(2.0);
        (T::from_usize_lossy(i) + shift - half) * self.dx + self.x_mid()
    }

    #[inline]
    pub fn y_at(&self, j: usize, shift: T) -> T {
        self.origin.1 + (T::from_usize_lossy(j) + shift) * self.dy
    }

    /// Minimum distance between the waveguide and any window edge, in nm.
    pub fn clearance(&self, cs: &CrossSection<T>) -> T {
        if cs.is_degenerate() {
            return T::infinity();
        }
        let two = T::lit(2.0);
        let (x0, y0) = self.origin;
        let (x1, y1) = (x0 + self.width(), y0 + self.height());
        let vertical = (-cs.height_nm / two - y0).min(y1 - cs.height_nm / two);
        match self.lateral {
            Lateral::Periodic => vertical,
            Lateral::Pec => vertical
                .min(-cs.width_nm / two - x0)
                .min(x1 - cs.width_nm / two),
        }
    }

    fn check_contains(&self, cs: &CrossSection<T>) -> Result<()> {
        if self.nx < 1 || self.ny < 1 {
            return Err(Error::Geometry("grid has no cells".into()));
        }
        if !(self.clearance(cs) > T::zero()) {
            return Err(Error::Geometry(format!(
                "waveguide ({} x {} nm) exceeds the {} x {} nm window",
                cs.width_nm,
                cs.height_nm,
                self.width(),
                self.height()
            )));
        }
        Ok(())
    }
}

/// Permittivity sampled at the staggered `Ex`, `Ey` and `Ez` locations.
#[derive(Debug, Clone, PartialEq)]
pub struct PermittivityMap<T> {
    pub grid: Grid2D<T>,
    pub lambda_nm: T,
    pub cross_section: CrossSection<T>,
    pub eps_x: Vec<T>,
    pub eps_y: Vec<T>,
    pub eps_z: Vec<T>,
}

/// Dimensions (columns, rows) of each staggered array.
pub fn ex_dims(nx: usize, ny: usize) -> (usize, usize) {
    (nx, ny + 1)
}

pub fn ey_dims(nx: usize, ny: usize) -> (usize, usize) {
    (nx + 1, ny)
}

pub fn ez_dims(nx: usize, ny: usize) -> (usize, usize) {
    (nx + 1, ny + 1)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Averaging {
    Area,
    HarmonicX,
    HarmonicY,
}

struct Layer<T> {
    rect: Rect<T>,
    delta_eps: T,
}

/// Renders the cross-section at `lambda_nm`. Cells cut by an interface take
/// the area mean for `εz` and, for `εx` / `εy`, the harmonic mean along the
/// component direction combined with the arithmetic mean across it.
pub fn rasterize<T: Real>(
    cs: &CrossSection<T>,
    grid: &Grid2D<T>,
    lambda_nm: T,
) -> Result<PermittivityMap<T>> {
    cs.validate()?;
    if !(grid.dx > T::zero() && grid.dy > T::zero()) {
        return Err(Error::Config("grid spacing must be positive".into()));
    }
    grid.check_contains(cs)?;
    let eps_rail = cs.rail_material.permittivity(lambda_nm)?;
    let eps_slot = cs.slot_material.permittivity(lambda_nm)?;
    let eps_sub = cs.substrate_material.permittivity(lambda_nm)?;
    let eps_clad = cs.cladding_material.permittivity(lambda_nm)?;

    let two = T::lit(2.0);
    let big = T::lit(1e30);
    let mut layers = vec![Layer {
        rect: Rect {
            x0: -big,
            x1: big,
            y0: -big,
            y1: -cs.height_nm / two,
        },
        delta_eps: eps_sub - eps_clad,
    }];
    if !cs.is_degenerate() {
        let w2 = if cs.width_nm.is_finite() { cs.width_nm / two } else { big };
        for (r, e) in [
            (cs.lower_rail_rect(), eps_rail),
            (cs.slot_rect(), eps_slot),
            (cs.upper_rail_rect(), eps_rail),
        ] {
            layers.push(Layer {
                rect: Rect { x0: -w2, x1: w2, ..r },
                delta_eps: e - eps_clad,
            });
        }
    }

    let (hx, hy) = (grid.dx / two, grid.dy / two);
    let cell_area = grid.dx * grid.dy;
    let point = |x: T, y: T| -> T {
        layers
            .iter()
            .filter(|l| l.rect.x0 < x && x < l.rect.x1 && l.rect.y0 < y && y < l.rect.y1)
            .fold(eps_clad, |e, l| e + l.delta_eps)
    };
    let cuts = |a: T, b: T, edges: &mut dyn Iterator<Item = T>| -> Vec<T> {
        let mut v: Vec<T> = edges.filter(|&e| e > a && e < b).collect();
        v.push(a);
        v.push(b);
        v.sort_by(|p, q| p.partial_cmp(q).unwrap());
        v.dedup();
        v
    };
    let sample = |xc: T, yc: T, avg: Averaging| -> T {
        // Fold into x ≥ 0: every layer is mirror-symmetric about x = 0.
        let xa = xc.abs();
        let (x0, x1, y0, y1) = (xa - hx, xa + hx, yc - hy, yc + hy);
        match avg {
            Averaging::Area => {
                let mut eps = eps_clad;
                for l in &layers {
                    let ox = overlap(x0, x1, l.rect.x0, l.rect.x1);
                    if ox == T::zero() {
                        continue;
                    }
                    let oy = overlap(y0, y1, l.rect.y0, l.rect.y1);
                    if oy == T::zero() {
                        continue;
                    }
                    let frac = if ox == grid.dx && oy == grid.dy {
                        T::one()
                    } else {
                        ox * oy / cell_area
                    };
                    eps += l.delta_eps * frac;
                }
                eps
            }
            Averaging::HarmonicX | Averaging::HarmonicY => {
                // Harmonic mean along the field direction inside each strip,
                // arithmetic mean across strips.
                let along_x = avg == Averaging::HarmonicX;
                let (a0, a1, b0, b1) = if along_x { (y0, y1, x0, x1) } else { (x0, x1, y0, y1) };
                let edges_a = |l: &Layer<T>| if along_x { [l.rect.y0, l.rect.y1] } else { [l.rect.x0, l.rect.x1] };
                let edges_b = |l: &Layer<T>| if along_x { [l.rect.x0, l.rect.x1] } else { [l.rect.y0, l.rect.y1] };
                let sa = cuts(a0, a1, &mut layers.iter().flat_map(edges_a));
                let sb = cuts(b0, b1, &mut layers.iter().flat_map(edges_b));
                if sa.len() == 2 && sb.len() == 2 {
                    return point(xa, yc);
                }
                let mut acc = T::zero();
                for wa in sa.windows(2) {
                    let am = (wa[0] + wa[1]) / two;
                    let mut inv = T::zero();
                    for wb in sb.windows(2) {
                        let bm = (wb[0] + wb[1]) / two;
                        let e = if along_x { point(bm, am) } else { point(am, bm) };
                        inv += (wb[1] - wb[0]) / e;
                    }
                    acc += (wa[1] - wa[0]) * (b1 - b0) / inv;
                }
                acc / (a1 - a0)
            }
        }
    };
    let fill = |(cols, rows): (usize, usize), sx: T, sy: T, avg: Averaging| -> Vec<T> {
        let mut out = Vec::with_capacity(cols * rows);
        for j in 0..rows {
            let y = grid.y_at(j, sy);
            for i in 0..cols {
                out.push(sample(grid.x_at(i, sx), y, avg));
            }
        }
        out
    };
    let half = T::lit(0.5);
    let (nx, ny) = (grid.nx, grid.ny);
    Ok(PermittivityMap {
        grid: *grid,
        lambda_nm,
        cross_section: cs.clone(),
        eps_x: fill(ex_dims(nx, ny), half, T::zero(), Averaging::HarmonicX),
        eps_y: fill(ey_dims(nx, ny), T::zero(), half, Averaging::HarmonicY),
        eps_z: fill(ez_dims(nx, ny), T::zero(), T::zero(), Averaging::Area),
    })
}

impl<T: Real> PermittivityMap<T> {
    pub fn rail_index(&self) -> Result<T> {
        self.cross_section.rail_material.refractive_index(self.lambda_nm)
    }

    /// Largest index among the unbounded media (substrate and cladding).
    pub fn background_index(&self) -> Result<T> {
        let cs = &self.cross_section;
        Ok(cs
            .substrate_material
            .refractive_index(self.lambda_nm)?
            .max(cs.cladding_material.refractive_index(self.lambda_nm)?))
    }

    /// Largest permittivity anywhere in the map.
    pub fn max_eps(&self) -> T {
        self.eps_x
            .iter()
            .chain(&self.eps_y)
            .chain(&self.eps_z)
            .fold(T::zero(), |a, &b| a.max(b))
    }

    pub fn min_eps(&self) -> T {
        self.eps_x
            .iter()
            .chain(&self.eps_y)
            .chain(&self.eps_z)
            .fold(T::infinity(), |a, &b| a.min(b))
    }

    /// Same cross-section and grid resampled at another wavelength.
    pub fn resample(&self, lambda_nm: T) -> Result<Self> {
        rasterize(&self.cross_section, &self.grid, lambda_nm)
    }
}
