//! Slot-waveguide mode solving, dipole coupling, geometry sweeps and
//! cavity-QED estimates.
//!
//! Numeric code is generic over [`Real`]; the aliases below fix the scalar
//! to `f64` (and `f32` for the solver types).

pub mod coupling;
pub mod cqed;
pub mod error;
pub mod fielddump;
pub mod geometry;
pub mod linalg;
pub mod materials;
pub mod modesolver;
pub mod scalar;
pub mod sweep;

pub use error::{Error, Result};
pub use scalar::Real;

pub type CrossSection64 = geometry::CrossSection<f64>;
pub type Grid2D64 = geometry::Grid2D<f64>;
pub type PermittivityMap64 = geometry::PermittivityMap<f64>;
pub type SolveRequest64 = modesolver::SolveRequest<f64>;
pub type SolverSettings64 = modesolver::SolverSettings<f64>;
pub type Mode64 = modesolver::Mode<f64>;
pub type DipoleSpec64 = coupling::DipoleSpec<f64>;
pub type CouplingModel64 = coupling::CouplingModel<f64>;
pub type CouplingResult64 = coupling::CouplingResult<f64>;
pub type ResonatorSpec64 = cqed::ResonatorSpec<f64>;
pub type EmitterParams64 = cqed::EmitterParams<f64>;
pub type CavityFigures64 = cqed::CavityFigures<f64>;
pub type Band64 = sweep::Band<f64>;
pub type SweepSpec64 = sweep::SweepSpec<f64>;
pub type SweepResult64 = sweep::SweepResult<f64>;

pub type CrossSection32 = geometry::CrossSection<f32>;
pub type Grid2D32 = geometry::Grid2D<f32>;
pub type PermittivityMap32 = geometry::PermittivityMap<f32>;
pub type SolveRequest32 = modesolver::SolveRequest<f32>;
pub type Mode32 = modesolver::Mode<f32>;
