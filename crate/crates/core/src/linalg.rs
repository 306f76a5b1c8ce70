//! Dense complex linear algebra: LAPACK bindings (eigendecomposition,
//! linear solves, singular values) and a scaling-and-squaring matrix
//! exponential after Higham (2005).

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use std::ffi::c_char;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat = Array2<C64>;
pub type CVec = Array1<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

extern "C" {
    fn zgeev_(
        jobvl: *const c_char,
        jobvr: *const c_char,
        n: *const i32,
        a: *mut C64,
        lda: *const i32,
        w: *mut C64,
        vl: *mut C64,
        ldvl: *const i32,
        vr: *mut C64,
        ldvr: *const i32,
        work: *mut C64,
        lwork: *const i32,
        rwork: *mut f64,
        info: *mut i32,
    );
    fn zgesv_(
        n: *const i32,
        nrhs: *const i32,
        a: *mut C64,
        lda: *const i32,
        ipiv: *mut i32,
        b: *mut C64,
        ldb: *const i32,
        info: *mut i32,
    );
    fn zgesvd_(
        jobu: *const c_char,
        jobvt: *const c_char,
        m: *const i32,
        n: *const i32,
        a: *mut C64,
        lda: *const i32,
        s: *mut f64,
        u: *mut C64,
        ldu: *const i32,
        vt: *mut C64,
        ldvt: *const i32,
        work: *mut C64,
        lwork: *const i32,
        rwork: *mut f64,
        info: *mut i32,
    );
}

pub fn identity(n: usize) -> Mat {
    Array2::eye(n)
}

pub fn adjoint(a: &Mat) -> Mat {
    a.t().mapv(|z| z.conj())
}

pub fn fro_norm(a: &Mat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Maximum absolute column sum.
fn one_norm(a: &Mat) -> f64 {
    let mut best = 0.0f64;
    for col in a.columns() {
        let s: f64 = col.iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

pub fn vec_norm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ⟨u|v⟩ = u†·v.
pub fn inner(u: &CVec, v: &CVec) -> C64 {
    u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
}

fn to_col_major(a: &Mat) -> Vec<C64> {
    let n = a.nrows();
    let m = a.ncols();
    let mut out = Vec::with_capacity(n * m);
    for j in 0..m {
        for i in 0..n {
            out.push(a[[i, j]]);
        }
    }
    out
}

fn from_col_major(v: &[C64], n: usize, m: usize) -> Mat {
    Array2::from_shape_fn((n, m), |(i, j)| v[j * n + i])
}

/// Right eigendecomposition of a general complex matrix.
///
/// Returns the eigenvalues and a matrix whose columns are the
/// (unit-norm) right eigenvectors, in LAPACK order.
pub fn eig(a: &Mat) -> Result<(Vec<C64>, Mat)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidArgument("eig requires a square matrix".into()));
    }
    let ni = n as i32;
    let mut work_a = to_col_major(a);
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut vr = vec![C64::new(0.0, 0.0); n * n];
    let mut vl = vec![C64::new(0.0, 0.0); 1];
    let lwork = (4 * n.max(1)) as i32;
    let mut work = vec![C64::new(0.0, 0.0); lwork as usize];
    let mut rwork = vec![0.0f64; 2 * n.max(1)];
    let mut info = 0i32;
    unsafe {
        zgeev_(
            b"N".as_ptr() as *const c_char,
            b"V".as_ptr() as *const c_char,
            &ni,
            work_a.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            vl.as_mut_ptr(),
            &1,
            vr.as_mut_ptr(),
            &ni,
            work.as_mut_ptr(),
            &lwork,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zgeev", info });
    }
    Ok((w, from_col_major(&vr, n, n)))
}

/// Solve A·X = B for X.
pub fn solve(a: &Mat, b: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if n != a.ncols() || b.nrows() != n {
        return Err(Error::InvalidArgument("solve: dimension mismatch".into()));
    }
    let nrhs = b.ncols() as i32;
    let ni = n as i32;
    let mut work_a = to_col_major(a);
    let mut work_b = to_col_major(b);
    let mut ipiv = vec![0i32; n];
    let mut info = 0i32;
    unsafe {
        zgesv_(
            &ni,
            &nrhs,
            work_a.as_mut_ptr(),
            &ni,
            ipiv.as_mut_ptr(),
            work_b.as_mut_ptr(),
            &ni,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zgesv", info });
    }
    Ok(from_col_major(&work_b, n, b.ncols()))
}

pub fn inverse(a: &Mat) -> Result<Mat> {
    solve(a, &identity(a.nrows()))
}

/// Singular values in descending order.
pub fn singular_values(a: &Mat) -> Result<Vec<f64>> {
    let n = a.nrows() as i32;
    let m = a.ncols() as i32;
    let k = n.min(m) as usize;
    let mut work_a = to_col_major(a);
    let mut s = vec![0.0f64; k.max(1)];
    let mut u = vec![C64::new(0.0, 0.0); 1];
    let mut vt = vec![C64::new(0.0, 0.0); 1];
    let lwork = (5 * (n.max(m)) as usize).max(1) as i32;
    let mut work = vec![C64::new(0.0, 0.0); lwork as usize];
    let mut rwork = vec![0.0f64; 5 * k.max(1)];
    let mut info = 0i32;
    unsafe {
        zgesvd_(
            b"N".as_ptr() as *const c_char,
            b"N".as_ptr() as *const c_char,
            &n,
            &m,
            work_a.as_mut_ptr(),
            &n,
            s.as_mut_ptr(),
            u.as_mut_ptr(),
            &1,
            vt.as_mut_ptr(),
            &1,
            work.as_mut_ptr(),
            &lwork,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zgesvd", info });
    }
    Ok(s)
}

/// 2-norm condition number σ_max/σ_min.
pub fn condition_number(a: &Mat) -> Result<f64> {
    let s = singular_values(a)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let smin = s.last().copied().unwrap_or(0.0);
    if smin == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(smax / smin)
}

// Padé coefficients for the [13/13] approximant.
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

/// Padé [m/m] for odd m; `coeffs` holds b_0..b_m.
fn pade_low(a: &Mat, coeffs: &[f64]) -> Result<Mat> {
    let n = a.nrows();
    let a2 = a.dot(a);
    let half = coeffs.len() / 2; // number of even powers A^0..A^{m-1}
    let mut pows = Vec::with_capacity(half);
    pows.push(identity(n));
    for _ in 1..half {
        let next = pows.last().unwrap().dot(&a2);
        pows.push(next);
    }
    let mut u_inner = Array2::<C64>::zeros((n, n));
    let mut v = Array2::<C64>::zeros((n, n));
    for (k, p) in pows.iter().enumerate() {
        v = v + p.mapv(|z| z * coeffs[2 * k]);
        u_inner = u_inner + p.mapv(|z| z * coeffs[2 * k + 1]);
    }
    let u = a.dot(&u_inner);
    solve(&(&v - &u), &(&v + &u))
}

fn pade13(a: &Mat) -> Result<Mat> {
    let n = a.nrows();
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let id = identity(n);
    let w1 = a6.mapv(|z| z * B13[13]) + a4.mapv(|z| z * B13[11]) + a2.mapv(|z| z * B13[9]);
    let w2 = a6.mapv(|z| z * B13[7])
        + a4.mapv(|z| z * B13[5])
        + a2.mapv(|z| z * B13[3])
        + id.mapv(|z| z * B13[1]);
    let u = a.dot(&(a6.dot(&w1) + w2));
    let z1 = a6.mapv(|z| z * B13[12]) + a4.mapv(|z| z * B13[10]) + a2.mapv(|z| z * B13[8]);
    let v = a6.dot(&z1)
        + a6.mapv(|z| z * B13[6])
        + a4.mapv(|z| z * B13[4])
        + a2.mapv(|z| z * B13[2])
        + id.mapv(|z| z * B13[0]);
    solve(&(&v - &u), &(&v + &u))
}

/// Matrix exponential by scaling-and-squaring with Padé approximants
/// (Higham 2005).
pub fn expm(a: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidArgument("expm requires a square matrix".into()));
    }
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    if !a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Range("expm: non-finite entries in input".into()));
    }
    let norm = one_norm(a);
    let result = if norm <= THETA3 {
        pade_low(a, &[120.0, 60.0, 12.0, 1.0])?
    } else if norm <= THETA5 {
        pade_low(a, &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0])?
    } else if norm <= THETA7 {
        pade_low(a, &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0])?
    } else if norm <= THETA9 {
        pade_low(
            a,
            &[
                17643225600.0,
                8821612800.0,
                2075673600.0,
                302702400.0,
                30270240.0,
                2162160.0,
                110880.0,
                3960.0,
                90.0,
                1.0,
            ],
        )?
    } else {
        let s = ((norm / THETA13).log2().ceil()).max(0.0) as u32;
        let scale = C64::new((0.5f64).powi(s as i32), 0.0);
        let scaled = a.mapv(|z| z * scale);
        let mut x = pade13(&scaled)?;
        for _ in 0..s {
            x = x.dot(&x);
        }
        x
    };
    if !result.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Range(
            "expm overflowed; subdivide the time interval and renormalize between steps".into(),
        ));
    }
    Ok(result)
}
