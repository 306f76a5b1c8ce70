//! Symmetric 1-D grids, the position/momentum basis change, the parity
//! permutation, and the spectral kinetic operator.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{adjoint, C64, Mat};
use crate::operator::{Basis, Operator};

/// Uniform 1-D spatial grid with endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
    hbar: f64,
    mass: f64,
}

impl Grid {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// x_j = x_min + j·dx.
    pub fn point(&self, j: usize) -> f64 {
        self.x_min + (j as f64) * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// A grid is symmetric when x_min = −x_max, i.e. x_j = −x_{n−1−j}.
    pub fn is_symmetric(&self) -> bool {
        self.x_min == -self.x_max
    }

    /// Momentum values in ascending order: p_k = ħ·2πk/(n·dx) with
    /// k ∈ {−⌊n/2⌋, …, ⌈n/2⌉−1}. For odd n, p and −p occupy
    /// index-reversed slots.
    pub fn momenta(&self) -> Vec<f64> {
        let n = self.n as i64;
        let k0 = if self.n % 2 == 1 { -(n - 1) / 2 } else { -n / 2 };
        (0..n)
            .map(|j| self.hbar * 2.0 * PI * ((k0 + j) as f64) / (self.n as f64 * self.dx))
            .collect()
    }
}

/// Build a symmetric grid on [−x_max, x_max] with n points.
pub fn make_grid(n: usize, x_max: f64, hbar: f64, mass: f64) -> Result<Arc<Grid>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("grid needs n >= 2, got {n}")));
    }
    if !(x_max > 0.0) {
        return Err(Error::InvalidArgument(format!("x_max must be positive, got {x_max}")));
    }
    if !(hbar > 0.0) || !(mass > 0.0) {
        return Err(Error::InvalidArgument("hbar and mass must be positive".into()));
    }
    let dx = 2.0 * x_max / ((n - 1) as f64);
    Ok(Arc::new(Grid { n, x_min: -x_max, x_max, dx, hbar, mass }))
}

/// Index-reversal permutation matrix Π in the position basis.
///
/// Π² = 1, Π = Π†, eigenvalues ∈ {−1, +1}.
pub fn parity_matrix(grid: &Arc<Grid>) -> Result<Operator> {
    if !grid.is_symmetric() {
        return Err(Error::Domain("parity is undefined on an asymmetric grid".into()));
    }
    let n = grid.n();
    let m = Array2::from_shape_fn((n, n), |(i, j)| {
        if i + j == n - 1 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
    });
    Operator::new(m, Basis::Position, Arc::clone(grid))
}

/// Unitary discrete Fourier matrix F mapping position amplitudes to
/// momentum amplitudes: F_{kj} = exp(−i p_k x_j/ħ)/√n.
pub fn momentum_map(grid: &Arc<Grid>) -> Operator {
    let n = grid.n();
    let x = grid.points();
    let p = grid.momenta();
    let norm = 1.0 / (n as f64).sqrt();
    let m = Array2::from_shape_fn((n, n), |(k, j)| {
        let phase = -p[k] * x[j] / grid.hbar();
        C64::new(phase.cos(), phase.sin()) * norm
    });
    // The map itself carries the position basis tag: it consumes
    // position-basis amplitudes.
    Operator::new(m, Basis::Position, Arc::clone(grid)).expect("square by construction")
}

/// Kinetic operator H₀ = P²/2m built spectrally: F†·diag(p²/2m)·F.
pub fn kinetic_operator(grid: &Arc<Grid>) -> Operator {
    let f = momentum_map(grid);
    let p = grid.momenta();
    let n = grid.n();
    let mut d: Mat = Array2::zeros((n, n));
    for k in 0..n {
        d[[k, k]] = C64::new(p[k] * p[k] / (2.0 * grid.mass()), 0.0);
    }
    let m = adjoint(f.matrix()).dot(&d).dot(f.matrix());
    Operator::new(m, Basis::Position, Arc::clone(grid)).expect("square by construction")
}
