//! Dense operators tagged with their representation basis.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{momentum_map, Grid};
use crate::linalg::{adjoint, fro_norm, CVec, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Position,
    Momentum,
}

/// A dense complex n×n matrix with its basis tag and, when it lives on a
/// grid, a reference to that grid. Model-space operators (e.g. the
/// two-level Hamiltonian) carry no grid.
#[derive(Debug, Clone)]
pub struct Operator {
    matrix: Mat,
    basis: Basis,
    grid: Option<Arc<Grid>>,
}

impl Operator {
    pub fn new(matrix: Mat, basis: Basis, grid: Arc<Grid>) -> Result<Self> {
        if matrix.nrows() != grid.n() || matrix.ncols() != grid.n() {
            return Err(Error::InvalidArgument(format!(
                "operator is {}x{} but grid has {} points",
                matrix.nrows(),
                matrix.ncols(),
                grid.n()
            )));
        }
        Ok(Operator { matrix, basis, grid: Some(grid) })
    }

    /// An operator on an abstract model space (no grid attached).
    pub fn model(matrix: Mat) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidArgument("model operator must be square".into()));
        }
        Ok(Operator { matrix, basis: Basis::Position, grid: None })
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat {
        self.matrix
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn grid(&self) -> Option<&Arc<Grid>> {
        self.grid.as_ref()
    }

    /// ħ of the underlying grid; model spaces use ħ = 1.
    pub fn hbar(&self) -> f64 {
        self.grid.as_ref().map(|g| g.hbar()).unwrap_or(1.0)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn fro_norm(&self) -> f64 {
        fro_norm(&self.matrix)
    }

    pub fn adjoint(&self) -> Self {
        Operator { matrix: adjoint(&self.matrix), basis: self.basis, grid: self.grid.clone() }
    }

    /// Replace the matrix, keeping basis and grid tags.
    pub fn with_matrix(&self, matrix: Mat) -> Self {
        Operator { matrix, basis: self.basis, grid: self.grid.clone() }
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        self.matrix.dot(v)
    }

    fn require_grid(&self) -> Result<&Arc<Grid>> {
        self.grid
            .as_ref()
            .ok_or_else(|| Error::Domain("operation requires a grid-backed operator".into()))
    }

    pub fn to_momentum(&self) -> Result<Self> {
        match self.basis {
            Basis::Momentum => Ok(self.clone()),
            Basis::Position => {
                let grid = self.require_grid()?;
                let f = momentum_map(grid);
                let m = f.matrix().dot(&self.matrix).dot(&adjoint(f.matrix()));
                Ok(Operator { matrix: m, basis: Basis::Momentum, grid: self.grid.clone() })
            }
        }
    }

    pub fn to_position(&self) -> Result<Self> {
        match self.basis {
            Basis::Position => Ok(self.clone()),
            Basis::Momentum => {
                let grid = self.require_grid()?;
                let f = momentum_map(grid);
                let m = adjoint(f.matrix()).dot(&self.matrix).dot(f.matrix());
                Ok(Operator { matrix: m, basis: Basis::Position, grid: self.grid.clone() })
            }
        }
    }

    pub fn in_basis(&self, basis: Basis) -> Result<Self> {
        match basis {
            Basis::Position => self.to_position(),
            Basis::Momentum => self.to_momentum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::linalg::C64;
    use ndarray::Array2;

    #[test]
    fn basis_round_trip() {
        let g = make_grid(16, 5.0, 1.0, 1.0).unwrap();
        let m = Array2::from_shape_fn((16, 16), |(i, j)| {
            C64::new(((i * 7 + j * 3) % 11) as f64 - 5.0, ((i + 2 * j) % 5) as f64)
        });
        let op = Operator::new(m.clone(), Basis::Position, g).unwrap();
        let back = op.to_momentum().unwrap().to_position().unwrap();
        let rel = fro_norm(&(back.matrix() - &m)) / fro_norm(&m);
        assert!(rel < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = make_grid(4, 1.0, 1.0, 1.0).unwrap();
        let m = Array2::<C64>::zeros((3, 3));
        assert!(Operator::new(m, Basis::Position, g).is_err());
    }
}
