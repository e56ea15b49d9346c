//! Dense complex linear algebra used by the operator layer.
//!
//! Matrix products go through BLAS; Hermitian eigendecompositions and SVDs
//! through LAPACK. Spectral norms of blocks at or above
//! [`EXACT_NORM_DIM`] use a Lanczos iteration instead of a full SVD (on `A`
//! itself when it is Hermitian or anti-Hermitian, on `A*A` otherwise),
//! and unitaries at or above [`EXACT_EXP_DIM`] use Padé scaling-and-squaring.

use ndarray::{Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use ndarray_linalg::{EigValsh, Eigh, Inverse, SVD, UPLO};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Blocks below this dimension get exact singular values.
pub const EXACT_NORM_DIM: usize = 1024;
/// Hermitian generators below this dimension are exponentiated by eigendecomposition.
pub const EXACT_EXP_DIM: usize = 1024;
/// Certification threshold for `‖U*U − 1‖_F`.
pub const UNITARITY_TOL: f64 = 1e-10;

const LANCZOS_TOL: f64 = 1e-12;
const LANCZOS_MAX_ITER: usize = 400;

pub fn identity(n: usize) -> CMat {
    Array2::from_diag_elem(n, ONE)
}

pub fn adjoint(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == ZERO {
                continue;
            }
            let mut blk = out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
            blk.zip_mut_with(b, |o, &bv| *o = aij * bv);
        }
    }
    out
}

pub fn trace(a: &CMat) -> C64 {
    a.diag().iter().copied().sum()
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn is_hermitian(a: &CMat, tol: f64) -> bool {
    let n = a.nrows();
    if n != a.ncols() {
        return false;
    }
    for i in 0..n {
        for j in i..n {
            if (a[[i, j]] - a[[j, i]].conj()).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
pub fn hermitian_eigh(a: &CMat) -> Result<(Array1<f64>, CMat)> {
    // Row-major input comes back with conjugated eigenvectors; hand LAPACK
    // a column-major copy instead.
    let mut f = Array2::zeros(a.raw_dim().f());
    f.assign(a);
    f.eigh(UPLO::Upper)
        .map_err(|e| Error::Numerical(format!("hermitian eigendecomposition failed: {e}")))
}

/// Largest singular value.
pub fn spectral_norm(a: &CMat) -> f64 {
    let n = a.nrows().max(a.ncols());
    if n == 0 {
        return 0.0;
    }
    let fro = frobenius(a);
    if fro == 0.0 {
        return 0.0;
    }
    if n == 1 {
        return a[[0, 0]].norm();
    }
    if n < EXACT_NORM_DIM {
        return exact_spectral_norm(a).unwrap_or_else(|_| lanczos_spectral_norm(a));
    }
    let tol = 1e-13 * fro;
    if is_hermitian(a, tol) {
        lanczos_hermitian_norm(a)
    } else if is_anti_hermitian(a, tol) {
        lanczos_hermitian_norm(&a.mapv(|z| z * I))
    } else {
        lanczos_spectral_norm(a)
    }
}

fn is_anti_hermitian(a: &CMat, tol: f64) -> bool {
    let n = a.nrows();
    n == a.ncols() && (0..n).all(|i| (i..n).all(|j| (a[[i, j]] + a[[j, i]].conj()).norm() <= tol))
}

/// `max |λ|` of a (numerically) Hermitian matrix, symmetrized first.
fn lanczos_hermitian_norm(h: &CMat) -> f64 {
    let sym = (h + &adjoint(h)).mapv(|z| z * 0.5);
    lanczos_extreme_eigenvalue(|v| sym.dot(v), sym.nrows()).abs()
}

fn exact_spectral_norm(a: &CMat) -> Result<f64> {
    if a.is_square() && is_hermitian(a, 0.0) {
        let vals = a
            .eigvalsh(UPLO::Upper)
            .map_err(|e| Error::Numerical(format!("eigvalsh failed: {e}")))?;
        return Ok(vals.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }
    let (_, s, _) = a
        .svd(false, false)
        .map_err(|e| Error::Numerical(format!("svd failed: {e}")))?;
    Ok(s.iter().fold(0.0_f64, |m, v| m.max(*v)))
}

/// Spectral norm through Lanczos on the PSD operator `A*A`, with full
/// reorthogonalization and a deterministic start vector.
pub fn lanczos_spectral_norm(a: &CMat) -> f64 {
    let n = a.ncols();
    let ah = adjoint(a);
    let apply = |v: &Array1<C64>| -> Array1<C64> { ah.dot(&a.dot(v)) };
    lanczos_extreme_eigenvalue(apply, n).max(0.0).sqrt()
}

/// Largest-magnitude eigenvalue of a Hermitian operator given as a matvec
/// closure (the largest eigenvalue when the operator is positive).
pub fn lanczos_extreme_eigenvalue<F>(apply: F, n: usize) -> f64
where
    F: Fn(&Array1<C64>) -> Array1<C64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c_05e5);
    let mut v: Array1<C64> =
        Array1::from_shape_fn(n, |_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv_inplace(|z| z / nv);

    let m_max = n.min(LANCZOS_MAX_ITER);
    let mut basis: Vec<Array1<C64>> = Vec::with_capacity(m_max);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last_theta = f64::NAN;
    basis.push(v);
    for j in 0..m_max {
        let mut w = apply(&basis[j]);
        let alpha = dot(&basis[j], &w).re;
        alphas.push(alpha);
        // full reorthogonalization, applied twice
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.scaled_add(-c, q);
            }
        }
        let beta = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let check = j + 1 == m_max || beta <= 1e-14 * alpha.abs().max(1e-300) || (j + 1) % 4 == 0;
        if check {
            let (theta, resid) = tridiagonal_top(&alphas, &betas, beta);
            let scale = theta.abs().max(1e-300);
            if resid <= LANCZOS_TOL * scale
                || (last_theta.is_finite() && (theta - last_theta).abs() <= 1e-15 * scale)
                || j + 1 == m_max
                || beta <= 1e-14 * alpha.abs().max(1e-300)
            {
                return theta;
            }
            last_theta = theta;
        }
        betas.push(beta);
        w.mapv_inplace(|z| z / beta);
        basis.push(w);
    }
    last_theta
}

fn dot(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Largest-magnitude Ritz value of the Lanczos tridiagonal matrix and its residual bound.
fn tridiagonal_top(alphas: &[f64], betas: &[f64], next_beta: f64) -> (f64, f64) {
    let m = alphas.len();
    let mut t = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        t[[i, i]] = alphas[i];
        if i + 1 < m {
            t[[i, i + 1]] = betas[i];
            t[[i + 1, i]] = betas[i];
        }
    }
    match t.eigh(UPLO::Upper) {
        Ok((vals, vecs)) => {
            let top = if vals[0].abs() > vals[m - 1].abs() { 0 } else { m - 1 };
            (vals[top], next_beta * vecs[[m - 1, top]].abs())
        }
        Err(_) => (alphas.iter().cloned().fold(f64::MIN, f64::max), f64::INFINITY),
    }
}

/// `exp(-i·dt·h)` for Hermitian `h`.
pub fn unitary_step(h: &CMat, dt: f64) -> Result<CMat> {
    let n = h.nrows();
    if n < EXACT_EXP_DIM {
        let (vals, vecs) = hermitian_eigh(h)?;
        Ok(spectral_unitary(&vals, &vecs, dt))
    } else {
        let gen = h.mapv(|z| z * C64::new(0.0, -dt));
        let u = expm(&gen)?;
        certify_unitary(&u)?;
        Ok(u)
    }
}

/// `V·diag(exp(-i·dt·λ))·V*` from an eigendecomposition.
pub fn spectral_unitary(vals: &Array1<f64>, vecs: &CMat, dt: f64) -> CMat {
    let mut scaled = vecs.clone();
    for (mut col, &lam) in scaled.axis_iter_mut(Axis(1)).zip(vals.iter()) {
        let phase = C64::from_polar(1.0, -lam * dt);
        col.mapv_inplace(|z| z * phase);
    }
    scaled.dot(&adjoint(vecs))
}

pub fn certify_unitary(u: &CMat) -> Result<()> {
    let mut g = adjoint(u).dot(u);
    for i in 0..g.nrows() {
        g[[i, i]] -= ONE;
    }
    let dev = frobenius(&g);
    if dev > UNITARITY_TOL {
        return Err(Error::Numerical(format!(
            "unitarity certification failed: ‖U*U − 1‖_F = {dev:.3e}"
        )));
    }
    Ok(())
}

const PADE13: [f64; 14] = [
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
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: ArrayView2<C64>) -> f64 {
    a.axis_iter(Axis(1))
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with the [13/13] Padé approximant.
pub fn expm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    let norm = one_norm(a.view());
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = 0.5_f64.powi(s);
    let a1 = a.mapv(|z| z * scale);
    let eye = identity(n);
    let a2 = a1.dot(&a1);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let b = |k: usize| C64::new(PADE13[k], 0.0);

    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u_poly = a6.dot(&inner_u) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &eye * b(1);
    let u = a1.dot(&u_poly);
    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = a6.dot(&inner_v) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &eye * b(0);

    let denom = (&v - &u)
        .inv()
        .map_err(|e| Error::Numerical(format!("Padé denominator is singular: {e}")))?;
    let mut r = denom.dot(&(&v + &u));
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

extern "C" {
    fn openblas_set_num_threads(n: std::os::raw::c_int);
}

/// Pins the OpenBLAS thread count; scans parallelize above BLAS instead.
pub fn set_blas_threads(n: usize) {
    // SAFETY: plain setter in the linked OpenBLAS, no pointers involved.
    unsafe { openblas_set_num_threads(n.max(1) as std::os::raw::c_int) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> CMat {
        ndarray::array![[ZERO, ONE], [ONE, ZERO]]
    }

    fn pauli_z() -> CMat {
        ndarray::array![[ONE, ZERO], [ZERO, -ONE]]
    }

    fn random_matrix(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, n), |_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
    }

    #[test]
    fn norm_of_sum_of_paulis() {
        let m = &pauli_x() + &pauli_z();
        assert!((spectral_norm(&m) - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn lanczos_agrees_with_svd() {
        for seed in 0..4 {
            let a = random_matrix(60, seed);
            let exact = exact_spectral_norm(&a).unwrap();
            let lz = lanczos_spectral_norm(&a);
            assert!((exact - lz).abs() <= 1e-10 * exact, "{exact} vs {lz}");
        }
    }

    #[test]
    fn hermitian_lanczos_finds_negative_extremes() {
        for seed in 0..3 {
            let a = random_matrix(50, seed);
            let mut h = &a + &adjoint(&a);
            for i in 0..50 {
                h[[i, i]] -= C64::new(20.0, 0.0);
            }
            let exact = exact_spectral_norm(&h).unwrap();
            assert!((lanczos_hermitian_norm(&h) - exact).abs() <= 1e-10 * exact);
            let skew = h.mapv(|z| z * I);
            assert!(is_anti_hermitian(&skew, 1e-14));
            assert!((lanczos_hermitian_norm(&skew.mapv(|z| z * I)) - exact).abs() <= 1e-10 * exact);
        }
    }

    #[test]
    fn pade_matches_eigendecomposition() {
        let a = random_matrix(24, 7);
        let h = (&a + &adjoint(&a)).mapv(|z| z * 3.0);
        let exact = {
            let (vals, vecs) = hermitian_eigh(&h).unwrap();
            spectral_unitary(&vals, &vecs, 0.7)
        };
        let pade = expm(&h.mapv(|z| z * C64::new(0.0, -0.7))).unwrap();
        let err = max_abs(&(&exact - &pade));
        assert!(err < 1e-11, "{err:e}");
        certify_unitary(&pade).unwrap();
    }

    #[test]
    fn eigh_reconstructs_and_inverse_is_correct() {
        let a = random_matrix(9, 5);
        let h = &a + &adjoint(&a);
        let (vals, vecs) = hermitian_eigh(&h).unwrap();
        let mut s = vecs.clone();
        for (mut col, &l) in s.axis_iter_mut(Axis(1)).zip(vals.iter()) {
            col.mapv_inplace(|z| z * l);
        }
        assert!(max_abs(&(&s.dot(&adjoint(&vecs)) - &h)) < 1e-12);
        let b = &a + &identity(9).mapv(|z| z * 3.0);
        let binv = b.inv().unwrap();
        assert!(max_abs(&(&b.dot(&binv) - &identity(9))) < 1e-12);
    }

    #[test]
    fn kron_dimensions_and_entries() {
        let k = kron(&pauli_z(), &pauli_x());
        assert_eq!(k.dim(), (4, 4));
        assert_eq!(k[[0, 1]], ONE);
        assert_eq!(k[[2, 3]], -ONE);
    }
}
