#![allow(dead_code)]

pub mod tmm;

use slotqed::geometry::{rasterize, CrossSection, Grid2D, PermittivityMap};
use slotqed::materials::MaterialDatabase;

/// GaP/SiO₂/GaP slab (laterally uniform) fully clad in SiO₂.
pub fn gap_slab(rail_nm: f64, slot_nm: f64) -> CrossSection<f64> {
    let db = MaterialDatabase::builtin();
    let mut cs = CrossSection::new(&db, "GaP", f64::INFINITY, 2.0 * rail_nm + slot_nm, slot_nm).unwrap();
    cs.cladding_material = db.get("SiO2").unwrap().clone();
    cs
}

pub fn slab_map(cs: &CrossSection<f64>, h: f64, padding: f64, lambda: f64) -> PermittivityMap<f64> {
    let grid = Grid2D::slab(cs, h, h, padding, 8).unwrap();
    rasterize(cs, &grid, lambda).unwrap()
}

pub fn slot_map(rail: &str, w: f64, h: f64, t: f64, step: f64, padding: f64, lambda: f64) -> PermittivityMap<f64> {
    let db = MaterialDatabase::builtin();
    let cs = CrossSection::new(&db, rail, w, h, t).unwrap();
    let grid = Grid2D::around(&cs, step, step, padding).unwrap();
    rasterize(&cs, &grid, lambda).unwrap()
}
