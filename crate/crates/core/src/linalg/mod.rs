//! Sparse and dense linear algebra used by the mode solver.

pub mod arnoldi;
pub mod dense;
pub mod multifrontal;
pub mod sparse;

pub use arnoldi::{shift_invert_eigs, shift_invert_eigs_above, ArnoldiSettings, EigenPair};
pub use multifrontal::{GroupLayout, SparseLu, Symbolic};
pub use sparse::CsrMatrix;
