//! Classification of a Hamiltonian against the eight commutation /
//! pseudohermiticity relations, in operator form and in both
//! matrix-element representations, plus the eigenvalue-mapping checks.

use std::sync::Arc;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hamiltonian::{conjugation_closure_residual, BiorthogonalSystem};
use crate::klein::{AntilinearMap, SymmetryCode};
use crate::linalg::{adjoint, fro_norm, vec_norm, C64, Mat};
use crate::operator::{Basis, Operator};
use crate::par;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct CodeResult {
    pub code: &'static str,
    pub residual: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    pub tolerance: f64,
    pub basis: Basis,
    pub codes: Vec<CodeResult>,
    /// Advisory: whether the held set is closed under the group
    /// operation. Near-tolerance residuals can break closure, so a
    /// false here is a warning, not a failure.
    pub subgroup_closed: bool,
}

impl SymmetryReport {
    pub fn residual(&self, code: SymmetryCode) -> f64 {
        self.codes[code.index()].residual
    }

    pub fn holds(&self, code: SymmetryCode) -> bool {
        self.codes[code.index()].holds
    }

    pub fn held_codes(&self) -> Vec<SymmetryCode> {
        SymmetryCode::ALL.iter().copied().filter(|c| self.holds(*c)).collect()
    }
}

/// Element bits (parity, time-reversal, dagger); the group operation is
/// bitwise XOR.
fn code_bits(code: SymmetryCode) -> u8 {
    let el = code.klein_element();
    let p = matches!(
        el,
        crate::klein::KleinElement::Parity | crate::klein::KleinElement::ParityTimeReversal
    ) as u8;
    let t = el.is_antilinear() as u8;
    let d = code.uses_dagger() as u8;
    p | (t << 1) | (d << 2)
}

fn subgroup_closed(held: &[SymmetryCode]) -> bool {
    let bits: Vec<u8> = held.iter().map(|c| code_bits(*c)).collect();
    bits.iter()
        .flat_map(|a| bits.iter().map(move |b| a ^ b))
        .all(|prod| bits.contains(&prod))
}

/// Matrix-element transformation of a Table code in a given basis.
/// `rev` is the index-reversal permutation (x → −x, or p → −p for odd n).
fn transform(m: &Mat, code: SymmetryCode, basis: Basis, rev: &[usize]) -> Mat {
    let n = m.nrows();
    let entry = |i: usize, j: usize| -> C64 {
        match (basis, code) {
            (_, SymmetryCode::I) => m[[i, j]],
            (_, SymmetryCode::II) => m[[j, i]].conj(),

            (Basis::Position, SymmetryCode::III) => m[[rev[i], rev[j]]],
            (Basis::Position, SymmetryCode::IV) => m[[rev[j], rev[i]]].conj(),
            (Basis::Position, SymmetryCode::V) => m[[i, j]].conj(),
            (Basis::Position, SymmetryCode::VI) => m[[j, i]],
            (Basis::Position, SymmetryCode::VII) => m[[rev[i], rev[j]]].conj(),
            (Basis::Position, SymmetryCode::VIII) => m[[rev[j], rev[i]]],

            (Basis::Momentum, SymmetryCode::III) => m[[rev[i], rev[j]]],
            (Basis::Momentum, SymmetryCode::IV) => m[[rev[j], rev[i]]].conj(),
            (Basis::Momentum, SymmetryCode::V) => m[[rev[i], rev[j]]].conj(),
            (Basis::Momentum, SymmetryCode::VI) => m[[rev[j], rev[i]]],
            (Basis::Momentum, SymmetryCode::VII) => m[[i, j]].conj(),
            (Basis::Momentum, SymmetryCode::VIII) => m[[j, i]],
        }
    };
    Array2::from_shape_fn((n, n), |(i, j)| entry(i, j))
}

fn needs_reversal(code: SymmetryCode, basis: Basis) -> bool {
    match basis {
        Basis::Position => !matches!(
            code,
            SymmetryCode::I | SymmetryCode::II | SymmetryCode::V | SymmetryCode::VI
        ),
        Basis::Momentum => matches!(
            code,
            SymmetryCode::III | SymmetryCode::IV | SymmetryCode::V | SymmetryCode::VI
        ),
    }
}

fn reversal_indices(n: usize) -> Vec<usize> {
    (0..n).map(|j| n - 1 - j).collect()
}

/// Residual of one Table relation for an operator already expressed in
/// the requested basis, as a relative Frobenius norm.
fn relation_residual(m: &Mat, code: SymmetryCode, basis: Basis) -> f64 {
    if code == SymmetryCode::I {
        return 0.0;
    }
    let rev = reversal_indices(m.nrows());
    let t = transform(m, code, basis, &rev);
    fro_norm(&(t - m)) / fro_norm(m).max(f64::MIN_POSITIVE)
}

/// Classify a Hamiltonian against all eight relations in a given basis.
/// Momentum-basis classification needs odd n (the Nyquist slot of an
/// even grid has no −p partner).
pub fn classify_in_basis(
    h: &Operator,
    grid: &Arc<Grid>,
    basis: Basis,
    tol: f64,
) -> Result<SymmetryReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if !grid.is_symmetric() {
        return Err(Error::Domain("classification requires a symmetric grid".into()));
    }
    if basis == Basis::Momentum && grid.n() % 2 == 0 {
        return Err(Error::Unsupported(
            "momentum-basis classification needs odd n (Nyquist frequency is self-paired)".into(),
        ));
    }
    let hb = h.in_basis(basis)?;
    let residuals = par::map(&SymmetryCode::ALL, |code| relation_residual(hb.matrix(), *code, basis));
    let codes: Vec<CodeResult> = SymmetryCode::ALL
        .iter()
        .zip(residuals.iter())
        .map(|(code, &residual)| CodeResult { code: code.roman(), residual, holds: residual < tol })
        .collect();
    let held: Vec<SymmetryCode> = SymmetryCode::ALL
        .iter()
        .copied()
        .filter(|c| codes[c.index()].holds)
        .collect();
    Ok(SymmetryReport { tolerance: tol, basis, codes, subgroup_closed: subgroup_closed(&held) })
}

/// Position-basis classification (the default).
pub fn classify(h: &Operator, grid: &Arc<Grid>, tol: f64) -> Result<SymmetryReport> {
    classify_in_basis(h, grid, Basis::Position, tol)
}

/// Residual of the stated matrix-element identity for one code, with
/// the operator transformed into the requested basis first.
pub fn matrix_condition_check(
    v: &Operator,
    code: SymmetryCode,
    basis: Basis,
    grid: &Arc<Grid>,
) -> Result<f64> {
    if !grid.is_symmetric() && needs_reversal(code, basis) {
        return Err(Error::Domain("reversal conditions require a symmetric grid".into()));
    }
    if basis == Basis::Momentum && grid.n() % 2 == 0 && needs_reversal(code, basis) {
        return Err(Error::Unsupported(
            "momentum-basis parity conditions need odd n".into(),
        ));
    }
    let vb = v.in_basis(basis)?;
    Ok(relation_residual(vb.matrix(), code, basis))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Commute,
    Pseudo,
}

#[derive(Debug, Clone, Serialize)]
pub struct MappingReport {
    pub relation: Relation,
    pub antilinear: bool,
    /// ‖(M − λ_j)·Aφ_j‖ / (‖H‖·‖Aφ_j‖) per eigenvector, where M is H
    /// (Commute) or H† (Pseudo) and λ_j follows the (anti)linearity rule.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Worst multiset-match distance between the spectrum and its
    /// conjugate.
    pub conjugation_closure: f64,
}

/// Residual of AH = HA (Commute) or AH = H†A (Pseudo) for an
/// (anti)linear A, relative to ‖H‖.
pub fn symmetry_relation_residual(h: &Operator, a: &AntilinearMap, relation: Relation) -> f64 {
    let hm = h.matrix();
    let l = a.linear_part().matrix();
    let lhs = if a.is_antilinear() { l.dot(&hm.mapv(|z| z.conj())) } else { l.dot(hm) };
    let rhs = match relation {
        Relation::Commute => hm.dot(l),
        Relation::Pseudo => adjoint(hm).dot(l),
    };
    fro_norm(&(lhs - rhs)) / fro_norm(hm).max(f64::MIN_POSITIVE)
}

/// Verify the eigenvalue-mapping consequences of a held relation:
/// A|φ_j⟩ is an eigenvector of H (Commute) or H† (Pseudo), with
/// eigenvalue E_j for linear A and E_j* for antilinear A.
pub fn eigen_mapping_check(
    h: &Operator,
    sys: &BiorthogonalSystem,
    a: &AntilinearMap,
    relation: Relation,
    tol: f64,
) -> Result<MappingReport> {
    let rel_res = symmetry_relation_residual(h, a, relation);
    if rel_res > tol {
        return Err(Error::Precondition(format!(
            "the {relation:?} relation does not hold: residual {rel_res:.3e} > {tol:.3e}"
        )));
    }
    let m = match relation {
        Relation::Commute => h.matrix().clone(),
        Relation::Pseudo => adjoint(h.matrix()),
    };
    let hnorm = fro_norm(h.matrix()).max(f64::MIN_POSITIVE);
    let mut residuals = Vec::with_capacity(sys.dim());
    for j in 0..sys.dim() {
        let phi = sys.right().column(j).to_owned();
        let w = a.apply(&phi);
        let lambda =
            if a.is_antilinear() { sys.eigenvalues()[j].conj() } else { sys.eigenvalues()[j] };
        let r = m.dot(&w) - w.mapv(|z| z * lambda);
        residuals.push(vec_norm(&r) / (hnorm * vec_norm(&w).max(f64::MIN_POSITIVE)));
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(MappingReport {
        relation,
        antilinear: a.is_antilinear(),
        residuals,
        max_residual,
        conjugation_closure: conjugation_closure_residual(sys.eigenvalues()),
    })
}
