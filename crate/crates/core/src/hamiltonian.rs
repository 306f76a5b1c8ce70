//! Hamiltonians H = H₀ + V for preset and file-supplied potentials, and
//! the biorthogonal eigensystem with its spectral resolution.

use std::path::PathBuf;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{kinetic_operator, Grid};
use crate::linalg::{
    adjoint, condition_number, eig, fro_norm, identity, inner, inverse, max_abs, C64, Mat,
};
use crate::operator::{Basis, Operator};

/// Preset potentials. All local kinds are diagonal in the position
/// basis; the separable kind is genuinely non-local.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum PotentialSpec {
    /// V(x) = −depth·exp(−x²/width²), real and even.
    RealGaussianWell { depth: f64, width: f64 },
    /// V(x) = i·slope·x.
    ImaginaryLinear { slope: f64 },
    /// V(x) = −i·strength·exp(−x²/width²).
    ComplexAbsorbing { strength: f64, width: f64 },
    /// ⟨x|V|y⟩ = coupling·u(x)·w(y) with Gaussian envelopes
    /// u(x) = exp(−(x−u_center)²/(2·u_width²)) and likewise for w.
    NonlocalSeparable {
        coupling: f64,
        #[serde(default)]
        u_center: f64,
        #[serde(default = "one")]
        u_width: f64,
        #[serde(default)]
        w_center: f64,
        #[serde(default = "one")]
        w_width: f64,
    },
    /// Entries read from CSV: n rows of 2n columns (Re, Im alternating).
    MatrixFile { path: PathBuf },
    /// The 2×2 model [[iγ, κ], [κ, −iγ]]; bypasses the grid.
    TwoLevelPT { gamma: f64, kappa: f64 },
}

fn one() -> f64 {
    1.0
}

/// The 2×2 PT model Hamiltonian [[iγ, κ], [κ, −iγ]].
pub fn two_level_pt(gamma: f64, kappa: f64) -> Operator {
    let mut m: Mat = Array2::zeros((2, 2));
    m[[0, 0]] = C64::new(0.0, gamma);
    m[[0, 1]] = C64::new(kappa, 0.0);
    m[[1, 0]] = C64::new(kappa, 0.0);
    m[[1, 1]] = C64::new(0.0, -gamma);
    Operator::model(m).expect("2x2 is square")
}

fn read_matrix_csv(path: &PathBuf, n: usize) -> Result<Mat> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| {
            Error::Input(format!("{}:{}: bad number: {e}", path.display(), lineno + 1))
        })?;
        rows.push(vals);
    }
    if rows.len() != n || rows.iter().any(|r| r.len() != 2 * n) {
        return Err(Error::Input(format!(
            "{}: expected {n} rows of {} columns, found {} rows",
            path.display(),
            2 * n,
            rows.len()
        )));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| C64::new(rows[i][2 * j], rows[i][2 * j + 1])))
}

/// Build the potential matrix for a spec on a grid (position basis).
pub fn build_potential(spec: &PotentialSpec, grid: &Arc<Grid>) -> Result<Operator> {
    let n = grid.n();
    let x = grid.points();
    let m: Mat = match spec {
        PotentialSpec::RealGaussianWell { depth, width } => {
            check_width(*width)?;
            Array2::from_shape_fn((n, n), |(i, j)| {
                if i == j {
                    C64::new(-depth * (-(x[i] / width).powi(2)).exp(), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
        }
        PotentialSpec::ImaginaryLinear { slope } => Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j { C64::new(0.0, slope * x[i]) } else { C64::new(0.0, 0.0) }
        }),
        PotentialSpec::ComplexAbsorbing { strength, width } => {
            check_width(*width)?;
            Array2::from_shape_fn((n, n), |(i, j)| {
                if i == j {
                    C64::new(0.0, -strength * (-(x[i] / width).powi(2)).exp())
                } else {
                    C64::new(0.0, 0.0)
                }
            })
        }
        PotentialSpec::NonlocalSeparable { coupling, u_center, u_width, w_center, w_width } => {
            check_width(*u_width)?;
            check_width(*w_width)?;
            let u: Vec<f64> =
                x.iter().map(|&xi| (-((xi - u_center) / u_width).powi(2) / 2.0).exp()).collect();
            let w: Vec<f64> =
                x.iter().map(|&xi| (-((xi - w_center) / w_width).powi(2) / 2.0).exp()).collect();
            Array2::from_shape_fn((n, n), |(i, j)| C64::new(coupling * u[i] * w[j], 0.0))
        }
        PotentialSpec::MatrixFile { path } => read_matrix_csv(path, n)?,
        PotentialSpec::TwoLevelPT { gamma, kappa } => {
            return Ok(two_level_pt(*gamma, *kappa));
        }
    };
    Operator::new(m, Basis::Position, Arc::clone(grid))
}

fn check_width(w: f64) -> Result<()> {
    if !(w > 0.0) {
        return Err(Error::InvalidArgument(format!("width must be positive, got {w}")));
    }
    Ok(())
}

/// H = H₀ + V in the position basis; the two-level model returns its
/// 2×2 matrix directly.
pub fn build_hamiltonian(grid: &Arc<Grid>, spec: &PotentialSpec) -> Result<Operator> {
    if let PotentialSpec::TwoLevelPT { gamma, kappa } = spec {
        return Ok(two_level_pt(*gamma, *kappa));
    }
    let v = build_potential(spec, grid)?;
    let h0 = kinetic_operator(grid);
    Ok(h0.with_matrix(h0.matrix() + v.matrix()))
}

/// Eigenvalues with mutually normalized right and left eigenvector sets:
/// H|φ_j⟩ = E_j|φ_j⟩, H†|φ̂_j⟩ = E_j*|φ̂_j⟩, ⟨φ̂_j|φ_k⟩ = δ_jk.
#[derive(Debug, Clone)]
pub struct BiorthogonalSystem {
    eigenvalues: Vec<C64>,
    right: Mat,
    left: Mat,
    eigvec_condition: f64,
    left_from_inverse: bool,
}

impl BiorthogonalSystem {
    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }
    /// Columns are the unit-norm right eigenvectors.
    pub fn right(&self) -> &Mat {
        &self.right
    }
    /// Columns are the left eigenvectors, scaled so ⟨φ̂_j|φ_j⟩ = 1.
    pub fn left(&self) -> &Mat {
        &self.left
    }
    pub fn eigvec_condition(&self) -> f64 {
        self.eigvec_condition
    }
    /// True when the left set came from inverting the right-vector
    /// matrix (the fallback for ambiguous eigenvalue pairing).
    pub fn left_from_inverse(&self) -> bool {
        self.left_from_inverse
    }
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// max |⟨φ̂_j|φ_k⟩ − δ_jk|.
    pub fn biorthonormality_residual(&self) -> f64 {
        let m = adjoint(&self.left).dot(&self.right);
        max_abs(&(m - identity(self.dim())))
    }

    /// Σ_j |φ_j⟩ E_j ⟨φ̂_j|.
    pub fn reconstruct(&self) -> Mat {
        let n = self.dim();
        let mut scaled = self.right.clone();
        for j in 0..n {
            let e = self.eigenvalues[j];
            scaled.column_mut(j).mapv_inplace(|z| z * e);
        }
        scaled.dot(&adjoint(&self.left))
    }
}

fn greedy_pairing(
    targets: &[C64],
    candidates: &[C64],
    cluster_tol: f64,
) -> std::result::Result<Vec<usize>, String> {
    let n = targets.len();
    let mut used = vec![false; n];
    let mut pairing = Vec::with_capacity(n);
    for (j, t) in targets.iter().enumerate() {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        let mut second_d = f64::INFINITY;
        for (k, c) in candidates.iter().enumerate() {
            if used[k] {
                continue;
            }
            let d = (t - c).norm();
            if d < best_d {
                second_d = best_d;
                best_d = d;
                best = k;
            } else if d < second_d {
                second_d = d;
            }
        }
        if second_d - best_d < cluster_tol {
            return Err(format!(
                "eigenvalue {t} (index {j}) has competing partners within cluster tolerance \
                 {cluster_tol:.3e} (distances {best_d:.3e} and {second_d:.3e})"
            ));
        }
        used[best] = true;
        pairing.push(best);
    }
    Ok(pairing)
}

/// Biorthogonal eigendecomposition. The near-exceptional refusal fires
/// when the right-eigenvector condition number exceeds 1/tol.
///
/// Left vectors come from an independent eigendecomposition of H†,
/// cross-validated against inversion of the right-vector matrix;
/// inversion is the fallback when the eigenvalue pairing is ambiguous.
pub fn biorthogonal_eig(h: &Operator, tol: f64) -> Result<BiorthogonalSystem> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let n = h.dim();
    let (evals, mut right) = eig(h.matrix())?;
    // unit-normalize the right vectors (zgeev already does; enforce)
    for j in 0..n {
        let col = right.column(j).to_owned();
        let nrm = crate::linalg::vec_norm(&col);
        right.column_mut(j).mapv_inplace(|z| z / nrm);
    }
    let cond = condition_number(&right)?;
    let threshold = 1.0 / tol;
    if cond > threshold {
        return Err(Error::NearExceptional { cond, threshold });
    }

    let scale = fro_norm(h.matrix()).max(f64::MIN_POSITIVE);
    let cluster_tol = 1e-8 * scale;

    // Inverse route: L = (V⁻¹)†, biorthonormal by construction.
    let left_inv = adjoint(&inverse(&right)?);

    let hd = adjoint(h.matrix());
    let (evals_d, left_raw) = eig(&hd)?;
    let conj_d: Vec<C64> = evals_d.iter().map(|z| z.conj()).collect();

    let eig_route = match greedy_pairing(&evals, &conj_d, cluster_tol) {
        Err(why) => Err(why),
        Ok(pairing) => {
            let mut left: Mat = Array2::zeros((n, n));
            let mut ok = true;
            for j in 0..n {
                let w = left_raw.column(pairing[j]).to_owned();
                let c = inner(&w, &right.column(j).to_owned());
                if c.norm() < 1e-14 {
                    ok = false;
                    break;
                }
                let cc = c.conj();
                for i in 0..n {
                    left[[i, j]] = w[i] / cc;
                }
            }
            if ok { Ok(left) } else { Err("vanishing left/right overlap".to_string()) }
        }
    };

    let accept = (1e-12 * cond).max(1e-8);
    let (left, left_from_inverse) = match eig_route {
        Ok(mut left) => {
            // One Gram refinement: with G = L†R ≈ 1, replacing L by
            // L·(G†)⁻¹ makes L†R = G⁻¹G = 1 to solve precision. This
            // cleans up the O(ε·‖H‖/gap) cross-talk zgeev leaves inside
            // near-degenerate clusters.
            let gram = adjoint(&left).dot(&right);
            if max_abs(&(&gram - &identity(n))) < 0.5 {
                left = left.dot(&adjoint(&inverse(&gram)?));
            }
            let m = adjoint(&left).dot(&right);
            let resid = max_abs(&(m - identity(n)));
            // Cross-validation against the inverse route.
            let dev = fro_norm(&(&left - &left_inv)) / fro_norm(&left_inv).max(1e-300);
            if resid <= accept && dev <= 1e-6 * cond.max(1.0) {
                (left, false)
            } else {
                (left_inv, true)
            }
        }
        Err(_) => (left_inv, true),
    };

    let sys = BiorthogonalSystem {
        eigenvalues: evals,
        right,
        left,
        eigvec_condition: cond,
        left_from_inverse,
    };
    let resid = sys.biorthonormality_residual();
    if resid > accept {
        return Err(Error::Degeneracy(format!(
            "biorthonormality residual {resid:.3e} exceeds {accept:.3e} even after the \
             inversion fallback"
        )));
    }
    Ok(sys)
}

/// Relative Frobenius residual of Σ_j |φ_j⟩E_j⟨φ̂_j| against H.
pub fn resolution_residual(sys: &BiorthogonalSystem, h: &Operator) -> f64 {
    let r = sys.reconstruct() - h.matrix();
    fro_norm(&r) / fro_norm(h.matrix()).max(f64::MIN_POSITIVE)
}

/// Worst greedy multiset-match distance between a spectrum and its own
/// conjugate; near zero when the spectrum is closed under conjugation.
pub fn conjugation_closure_residual(eigenvalues: &[C64]) -> f64 {
    let conj: Vec<C64> = eigenvalues.iter().map(|z| z.conj()).collect();
    let mut used = vec![false; conj.len()];
    let mut worst = 0.0f64;
    for e in eigenvalues {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (k, c) in conj.iter().enumerate() {
            if !used[k] {
                let d = (e - c).norm();
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
        }
        used[best] = true;
        worst = worst.max(best_d);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn imaginary_linear_is_diagonal_ix() {
        let g = make_grid(5, 2.0, 1.0, 1.0).unwrap();
        let v = build_potential(&PotentialSpec::ImaginaryLinear { slope: 1.0 }, &g).unwrap();
        for j in 0..5 {
            assert_eq!(v.matrix()[[j, j]], C64::new(0.0, g.point(j)));
        }
        assert_eq!(v.matrix()[[0, 1]], C64::new(0.0, 0.0));
    }

    #[test]
    fn complex_absorbing_diagonal() {
        let g = make_grid(5, 2.0, 1.0, 1.0).unwrap();
        let v = build_potential(&PotentialSpec::ComplexAbsorbing { strength: 1.0, width: 1.0 }, &g)
            .unwrap();
        for j in 0..5 {
            let x = g.point(j);
            assert!((v.matrix()[[j, j]] - C64::new(0.0, -(-x * x).exp())).norm() < 1e-15);
        }
    }

    #[test]
    fn nonlocal_separable_rank_one_hermitian() {
        let g = make_grid(17, 4.0, 1.0, 1.0).unwrap();
        let spec = PotentialSpec::NonlocalSeparable {
            coupling: 1.0,
            u_center: 0.0,
            u_width: 1.0,
            w_center: 0.0,
            w_width: 1.0,
        };
        let v = build_potential(&spec, &g).unwrap();
        // Hermitian (u = w real)
        let herm = fro_norm(&(v.matrix() - &adjoint(v.matrix())));
        assert!(herm < 1e-14);
        // rank 1 by singular values
        let s = crate::linalg::singular_values(v.matrix()).unwrap();
        assert!(s[0] > 1e-2 && s[1] < 1e-14 * s[0]);
        // off-diagonal entries genuinely non-vanishing
        assert!(v.matrix()[[3, 9]].norm() > 0.0);
    }

    #[test]
    fn zero_potential_gives_hermitian_kinetic() {
        let g = make_grid(15, 4.0, 1.0, 1.0).unwrap();
        let h = build_hamiltonian(&g, &PotentialSpec::RealGaussianWell { depth: 0.0, width: 1.0 })
            .unwrap();
        let herm = fro_norm(&(h.matrix() - &adjoint(h.matrix()))) / h.fro_norm();
        assert!(herm < 1e-12);
    }

    #[test]
    fn two_level_pt_hermitian_limit() {
        let h = two_level_pt(0.0, 1.0);
        assert_eq!(h.matrix()[[0, 1]], C64::new(1.0, 0.0));
        let (w, _) = eig(h.matrix()).unwrap();
        let mut re: Vec<f64> = w.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 1.0).abs() < 1e-12 && (re[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_level_pt_broken_phase_conjugate_pair() {
        // Closed form ±sqrt(κ²−γ²) = ±i√3 for γ=2, κ=1.
        let h = two_level_pt(2.0, 1.0);
        let sys = biorthogonal_eig(&h, 1e-10).unwrap();
        let mut im: Vec<f64> = sys.eigenvalues().iter().map(|z| z.im).collect();
        im.sort_by(f64::total_cmp);
        let s3 = 3f64.sqrt();
        assert!((im[0] + s3).abs() < 1e-12 && (im[1] - s3).abs() < 1e-12);
        assert!(sys.eigenvalues().iter().all(|z| z.re.abs() < 1e-12));
        assert!(resolution_residual(&sys, &h) < 1e-12);
    }

    #[test]
    fn hermitian_left_equals_right() {
        let g = make_grid(21, 4.0, 1.0, 1.0).unwrap();
        let h = build_hamiltonian(&g, &PotentialSpec::RealGaussianWell { depth: 1.0, width: 1.5 })
            .unwrap();
        let sys = biorthogonal_eig(&h, 1e-10).unwrap();
        assert!(sys.eigenvalues().iter().all(|z| z.im.abs() < 1e-10));
        // left and right columns proportional (here: equal up to phase and scale)
        for j in 0..21 {
            let r = sys.right().column(j).to_owned();
            let l = sys.left().column(j).to_owned();
            let c = inner(&r, &l);
            let dev: f64 = l
                .iter()
                .zip(r.iter())
                .map(|(a, b)| (a - b * c).norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-8, "column {j}: {dev}");
        }
        assert!(sys.biorthonormality_residual() < 1e-10);
    }

    #[test]
    fn degenerate_kinetic_uses_inversion_fallback() {
        // H₀ has exactly degenerate ±p pairs; the H† pairing is ambiguous
        // and the inversion fallback must still deliver the resolution.
        let g = make_grid(63, 10.0, 1.0, 1.0).unwrap();
        let h = kinetic_operator(&g);
        let sys = biorthogonal_eig(&h, 1e-8).unwrap();
        assert!(sys.left_from_inverse());
        assert!(resolution_residual(&sys, &h) < 1e-10);
    }

    #[test]
    fn resolution_of_identity_is_exact() {
        let op = Operator::model(identity(6)).unwrap();
        let sys = biorthogonal_eig(&op, 1e-10).unwrap();
        assert!(resolution_residual(&sys, &op) < 1e-14);
    }

    #[test]
    fn exceptional_point_refused() {
        let h = two_level_pt(1.0, 1.0);
        match biorthogonal_eig(&h, 1e-6) {
            Err(Error::NearExceptional { .. }) => {}
            other => panic!("expected near-exceptional refusal, got {other:?}"),
        }
    }

    #[test]
    fn hdag_spectrum_is_conjugate() {
        let g = make_grid(31, 5.0, 1.0, 1.0).unwrap();
        let h = build_hamiltonian(&g, &PotentialSpec::ImaginaryLinear { slope: 1.0 }).unwrap();
        let (e, _) = eig(h.matrix()).unwrap();
        let (ed, _) = eig(&adjoint(h.matrix())).unwrap();
        let conj_d: Vec<C64> = ed.iter().map(|z| z.conj()).collect();
        let pairing = greedy_pairing(&e, &conj_d, 0.0).unwrap();
        let worst = e
            .iter()
            .enumerate()
            .map(|(j, z)| (z - conj_d[pairing[j]]).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8 * fro_norm(h.matrix()), "worst = {worst}");
    }

    #[test]
    fn matrix_file_round_trip() {
        let dir = std::env::temp_dir().join("nonherm-matrixfile-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("v.csv");
        let mut text = String::new();
        let vals = [
            [(1.0, 0.5), (0.0, -2.0)],
            [(3.25, 0.0), (-1.0, 1.0)],
        ];
        for row in vals {
            let cells: Vec<String> =
                row.iter().flat_map(|(re, im)| [format!("{re}"), format!("{im}")]).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        std::fs::write(&path, text).unwrap();
        let g = make_grid(2, 1.0, 1.0, 1.0).unwrap();
        let v = build_potential(&PotentialSpec::MatrixFile { path: path.clone() }, &g).unwrap();
        assert_eq!(v.matrix()[[0, 0]], C64::new(1.0, 0.5));
        assert_eq!(v.matrix()[[1, 1]], C64::new(-1.0, 1.0));
        // dimension mismatch against a larger grid
        let g3 = make_grid(3, 1.0, 1.0, 1.0).unwrap();
        assert!(build_potential(&PotentialSpec::MatrixFile { path }, &g3).is_err());
        // missing file
        let missing = dir.join("nope.csv");
        assert!(build_potential(&PotentialSpec::MatrixFile { path: missing }, &g).is_err());
    }
}
