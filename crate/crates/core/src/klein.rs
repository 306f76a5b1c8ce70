//! Klein's 4-group of (anti)linear operators, the eight superoperators
//! built from it, the Hilbert–Schmidt inner product, adjoints, and the
//! group/Wigner verification routines.

use std::sync::Arc;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{parity_matrix, Grid};
use crate::linalg::{adjoint, fro_norm, identity, max_abs, C64, CVec, Mat};
use crate::operator::{Basis, Operator};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KleinElement {
    One,
    Parity,
    TimeReversal,
    ParityTimeReversal,
}

impl KleinElement {
    pub const ALL: [KleinElement; 4] =
        [KleinElement::One, KleinElement::Parity, KleinElement::TimeReversal, KleinElement::ParityTimeReversal];

    pub fn is_antilinear(self) -> bool {
        matches!(self, KleinElement::TimeReversal | KleinElement::ParityTimeReversal)
    }
}

/// An (anti)unitary map stored as a unitary linear part plus a
/// conjugation flag: v ↦ L·v or v ↦ L·conj(v).
///
/// Antilinear operators have no matrix representation compatible with
/// complex scalars, so the conjugation is kept symbolic.
#[derive(Debug, Clone)]
pub struct AntilinearMap {
    linear_part: Operator,
    conjugates: bool,
}

impl AntilinearMap {
    pub fn new(linear_part: Operator, conjugates: bool) -> Self {
        AntilinearMap { linear_part, conjugates }
    }

    /// One of {1, Π, Θ, ΠΘ} in the position basis.
    pub fn klein(which: KleinElement, grid: &Arc<Grid>) -> Result<Self> {
        let needs_parity =
            matches!(which, KleinElement::Parity | KleinElement::ParityTimeReversal);
        if needs_parity && !grid.is_symmetric() {
            return Err(Error::Domain("parity requires a symmetric grid".into()));
        }
        let linear_part = if needs_parity {
            parity_matrix(grid)?
        } else {
            Operator::new(identity(grid.n()), Basis::Position, Arc::clone(grid))?
        };
        Ok(AntilinearMap { linear_part, conjugates: which.is_antilinear() })
    }

    pub fn linear_part(&self) -> &Operator {
        &self.linear_part
    }

    pub fn is_antilinear(&self) -> bool {
        self.conjugates
    }

    pub fn dim(&self) -> usize {
        self.linear_part.dim()
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        if self.conjugates {
            self.linear_part.matrix().dot(&v.mapv(|z| z.conj()))
        } else {
            self.linear_part.matrix().dot(v)
        }
    }

    /// The adjoint map: L† for a linear map, v ↦ Lᵀ·conj(v) for an
    /// antilinear one.
    pub fn adjoint(&self) -> Self {
        let m = if self.conjugates {
            self.linear_part.matrix().t().to_owned()
        } else {
            adjoint(self.linear_part.matrix())
        };
        AntilinearMap { linear_part: self.linear_part.with_matrix(m), conjugates: self.conjugates }
    }

    /// Composition self ∘ other as maps on vectors.
    pub fn compose(&self, other: &Self) -> Self {
        let other_part = if self.conjugates {
            other.linear_part.matrix().mapv(|z| z.conj())
        } else {
            other.linear_part.matrix().clone()
        };
        let m = self.linear_part.matrix().dot(&other_part);
        AntilinearMap {
            linear_part: self.linear_part.with_matrix(m),
            conjugates: self.conjugates ^ other.conjugates,
        }
    }

    /// Matrix of the linear map self ∘ B ∘ self⁻¹-style sandwich is
    /// handled by [`Superoperator`]; this returns A∘M as a "linear part +
    /// flag" pair where M is a linear operator.
    pub fn after(&self, m: &Mat) -> (Mat, bool) {
        if self.conjugates {
            (self.linear_part.matrix().dot(&m.mapv(|z| z.conj())), true)
        } else {
            (self.linear_part.matrix().dot(m), false)
        }
    }

    /// M∘A as a "linear part + flag" pair.
    pub fn before(&self, m: &Mat) -> (Mat, bool) {
        (m.dot(self.linear_part.matrix()), self.conjugates)
    }
}

/// Roman-numeral codes of the eight Table-style symmetries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SymmetryCode {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
}

impl SymmetryCode {
    pub const ALL: [SymmetryCode; 8] = [
        SymmetryCode::I,
        SymmetryCode::II,
        SymmetryCode::III,
        SymmetryCode::IV,
        SymmetryCode::V,
        SymmetryCode::VI,
        SymmetryCode::VII,
        SymmetryCode::VIII,
    ];

    pub fn roman(self) -> &'static str {
        match self {
            SymmetryCode::I => "I",
            SymmetryCode::II => "II",
            SymmetryCode::III => "III",
            SymmetryCode::IV => "IV",
            SymmetryCode::V => "V",
            SymmetryCode::VI => "VI",
            SymmetryCode::VII => "VII",
            SymmetryCode::VIII => "VIII",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).unwrap()
    }

    /// The Klein element whose commutation (odd codes) or
    /// pseudohermiticity (even codes) this code expresses.
    pub fn klein_element(self) -> KleinElement {
        match self {
            SymmetryCode::I | SymmetryCode::II => KleinElement::One,
            SymmetryCode::III | SymmetryCode::IV => KleinElement::Parity,
            SymmetryCode::V | SymmetryCode::VI => KleinElement::TimeReversal,
            SymmetryCode::VII | SymmetryCode::VIII => KleinElement::ParityTimeReversal,
        }
    }

    /// Whether ℒ_† enters the superoperator (the pseudohermiticity codes).
    pub fn uses_dagger(self) -> bool {
        matches!(self, SymmetryCode::II | SymmetryCode::IV | SymmetryCode::VI | SymmetryCode::VIII)
    }
}

/// A map on operators: B ↦ A†BA, B ↦ B†, or their composite.
/// Never materialized as an n²×n² matrix; acts functionally.
#[derive(Debug, Clone)]
pub struct Superoperator {
    sandwich: Option<AntilinearMap>,
    dagger: bool,
}

impl Superoperator {
    pub fn new(sandwich: Option<AntilinearMap>, dagger: bool) -> Self {
        Superoperator { sandwich, dagger }
    }

    /// The superoperator of a Table code over a symmetric grid.
    pub fn from_code(code: SymmetryCode, grid: &Arc<Grid>) -> Result<Self> {
        let sandwich = match code.klein_element() {
            KleinElement::One => None,
            el => Some(AntilinearMap::klein(el, grid)?),
        };
        Ok(Superoperator { sandwich, dagger: code.uses_dagger() })
    }

    pub fn sandwich(&self) -> Option<&AntilinearMap> {
        self.sandwich.as_ref()
    }

    pub fn uses_dagger(&self) -> bool {
        self.dagger
    }

    /// Antilinearity as a superoperator, checked by the scalar rule
    /// ℒ(aB) = a*ℒ(B): holds when exactly one of {antilinear sandwich,
    /// dagger} is present.
    pub fn is_antilinear(&self) -> bool {
        self.sandwich.as_ref().map(|a| a.conjugates).unwrap_or(false) ^ self.dagger
    }

    /// Apply to an operator. The result is always a linear operator.
    pub fn apply(&self, b: &Operator) -> Result<Operator> {
        if let Some(a) = &self.sandwich {
            if a.linear_part.dim() != b.dim() {
                return Err(Error::InvalidArgument("superoperator/operator dimension mismatch".into()));
            }
            if a.linear_part.basis() != b.basis() {
                return Err(Error::InvalidArgument(
                    "superoperator and operator must share a basis".into(),
                ));
            }
        }
        let m = if self.dagger { adjoint(b.matrix()) } else { b.matrix().clone() };
        let out = match &self.sandwich {
            None => m,
            Some(a) if !a.conjugates => {
                let l = a.linear_part.matrix();
                adjoint(l).dot(&m).dot(l)
            }
            Some(a) => {
                // A antilinear with linear part L: A†BA = Lᵀ·conj(B)·conj(L)
                let l = a.linear_part.matrix();
                l.t().dot(&m.mapv(|z| z.conj())).dot(&l.mapv(|z| z.conj()))
            }
        };
        Ok(b.with_matrix(out))
    }

    /// Adjoint with respect to the Hilbert–Schmidt product:
    /// ℒ_A† = ℒ_{A†}, ℒ_†† = ℒ_†, ℒ_{A,†}† = ℒ_{A†,†}.
    pub fn adjoint(&self) -> Self {
        Superoperator { sandwich: self.sandwich.as_ref().map(|a| a.adjoint()), dagger: self.dagger }
    }
}

/// Hilbert–Schmidt inner product ⟨⟨F,G⟩⟩ = Tr(F†G).
pub fn hs_inner(f: &Operator, g: &Operator) -> Result<C64> {
    if f.dim() != g.dim() {
        return Err(Error::InvalidArgument("hs_inner: dimension mismatch".into()));
    }
    Ok(f.matrix().iter().zip(g.matrix().iter()).map(|(a, b)| a.conj() * b).sum())
}

/// |⟨⟨ℒρ₁, ℒρ₂⟩⟩ − ⟨⟨ρ₁, ρ₂⟩⟩| for density operators ρ₁, ρ₂.
pub fn wigner_check(l: &Superoperator, rho1: &Operator, rho2: &Operator) -> Result<f64> {
    for rho in [rho1, rho2] {
        let herm = fro_norm(&(rho.matrix() - &adjoint(rho.matrix())));
        if herm > 1e-10 * rho.fro_norm().max(1.0) {
            return Err(Error::InvalidArgument("wigner_check requires Hermitian inputs".into()));
        }
    }
    let before = hs_inner(rho1, rho2)?;
    if before.im.abs() > 1e-12 * before.norm().max(1.0) {
        return Err(Error::Domain("⟨⟨ρ₁,ρ₂⟩⟩ is not real; inputs are not density operators".into()));
    }
    let after = hs_inner(&l.apply(rho1)?, &l.apply(rho2)?)?;
    Ok((after - before).norm())
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupReport {
    pub n: usize,
    /// composition_table[i][j] = code of ℒ_i ∘ ℒ_j.
    pub composition_table: Vec<Vec<String>>,
    pub closed: bool,
    pub abelian: bool,
    pub all_self_inverse: bool,
    pub generated_by_minimal_set: bool,
    pub passed: bool,
}

/// Test matrices spanning the operator space over the reals:
/// every E_ab and every i·E_ab.
fn test_matrices(n: usize) -> Vec<Mat> {
    let mut out = Vec::with_capacity(2 * n * n);
    for a in 0..n {
        for b in 0..n {
            for unit in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut m: Mat = Array2::zeros((n, n));
                m[[a, b]] = unit;
                out.push(m);
            }
        }
    }
    out
}

/// Compose all ordered pairs of the eight superoperators by their action
/// on a spanning set of matrices and verify the elementary abelian group
/// structure of order eight.
pub fn verify_group(grid: &Arc<Grid>) -> Result<GroupReport> {
    if !grid.is_symmetric() {
        return Err(Error::Domain("group verification needs a symmetric grid".into()));
    }
    let n = grid.n();
    let supers: Vec<Superoperator> = SymmetryCode::ALL
        .iter()
        .map(|c| Superoperator::from_code(*c, grid))
        .collect::<Result<_>>()?;
    let tests = test_matrices(n);
    let test_ops: Vec<Operator> = tests
        .iter()
        .map(|m| Operator::new(m.clone(), Basis::Position, Arc::clone(grid)))
        .collect::<Result<_>>()?;

    // Direct action of each element on every test matrix.
    let signatures: Vec<Vec<Operator>> = supers
        .iter()
        .map(|s| test_ops.iter().map(|t| s.apply(t)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let match_element = |action: &dyn Fn(&Operator) -> Result<Operator>| -> Result<Option<usize>> {
        'candidates: for (k, sig) in signatures.iter().enumerate() {
            for (t, expect) in test_ops.iter().zip(sig.iter()) {
                let got = action(t)?;
                if max_abs(&(got.matrix() - expect.matrix())) > 1e-12 {
                    continue 'candidates;
                }
            }
            return Ok(Some(k));
        }
        Ok(None)
    };

    let pairs: Vec<(usize, usize)> =
        (0..8).flat_map(|i| (0..8).map(move |j| (i, j))).collect();
    let found: Vec<Option<usize>> = par::try_map(&pairs, |&(i, j)| {
        let outer = &supers[i];
        let inner = &supers[j];
        match_element(&|t: &Operator| outer.apply(&inner.apply(t)?))
    })?;

    let mut table = vec![vec![None; 8]; 8];
    for (slot, &(i, j)) in found.iter().zip(pairs.iter()) {
        table[i][j] = *slot;
    }
    let closed = table.iter().flatten().all(|e| e.is_some());
    let abelian = closed && (0..8).all(|i| (0..8).all(|j| table[i][j] == table[j][i]));
    let all_self_inverse = closed && (0..8).all(|i| table[i][i] == Some(0));

    // Closure of the generating set {ℒ_†, ℒ_Π, ℒ_Θ} = codes {II, III, V}.
    let mut reached = [false; 8];
    reached[0] = true;
    for g in [1usize, 2, 4] {
        reached[g] = true;
    }
    let mut grew = closed;
    while grew {
        grew = false;
        for i in 0..8 {
            for j in 0..8 {
                if reached[i] && reached[j] {
                    if let Some(k) = table[i][j] {
                        if !reached[k] {
                            reached[k] = true;
                            grew = true;
                        }
                    }
                }
            }
        }
    }
    let generated = closed && reached.iter().all(|r| *r);

    let table_codes: Vec<Vec<String>> = table
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| match e {
                    Some(k) => SymmetryCode::ALL[*k].roman().to_string(),
                    None => "?".to_string(),
                })
                .collect()
        })
        .collect();

    let passed = closed && abelian && all_self_inverse && generated;
    Ok(GroupReport {
        n,
        composition_table: table_codes,
        closed,
        abelian,
        all_self_inverse,
        generated_by_minimal_set: generated,
        passed,
    })
}
