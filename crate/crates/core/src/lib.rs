//! Non-Hermitian Hamiltonians on 1-D grids and small model spaces:
//! Klein-group symmetry classification, superoperator algebra,
//! biorthogonal spectra, evolution under H and H†, conservation-law
//! audits, and time-dependent dynamical invariants.

pub mod dynamics;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod invariants;
pub mod klein;
pub mod linalg;
pub mod operator;
mod par;
pub mod symmetry;

pub use error::{Error, Result};
pub use grid::{make_grid, Grid};
pub use linalg::{C64, CVec, Mat};
pub use operator::{Basis, Operator};
