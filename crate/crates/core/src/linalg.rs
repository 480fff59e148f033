//! Dense complex linear algebra shared by every module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Matrix spaces `M_D` are
//! identified with `C^{D²}` through row-major vectorization, so that
//! `vec(A X B†) = (A ⊗ conj(B)) vec(X)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Upper bound on QR sweeps for the non-Hermitian eigensolver.
pub const EIG_MAX_ITER: usize = 10_000;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Row-major vectorization: entry `(r, c)` goes to `r * ncols + c`.
pub fn vec_row(m: &CMat) -> CVec {
    let (r, c) = m.shape();
    CVec::from_fn(r * c, |k, _| m[(k / c, k % c)])
}

pub fn unvec_row(v: &CVec, rows: usize, cols: usize) -> CMat {
    assert_eq!(v.len(), rows * cols);
    CMat::from_fn(rows, cols, |r, c| v[r * cols + c])
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Matrix power by repeated squaring. `n = 0` yields the identity.
pub fn mat_pow(m: &CMat, mut n: usize) -> CMat {
    assert!(m.is_square());
    let mut result = identity(m.nrows());
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

/// `m^n` with the running product rescaled to unit max-entry after every
/// multiplication. Only the direction is meaningful.
pub fn mat_pow_normalized(m: &CMat, mut n: usize) -> CMat {
    assert!(m.is_square());
    let mut result = identity(m.nrows());
    let mut base = normalize_max(m.clone());
    while n > 0 {
        if n & 1 == 1 {
            result = normalize_max(&result * &base);
        }
        n >>= 1;
        if n > 0 {
            base = normalize_max(&base * &base);
        }
    }
    result
}

pub fn normalize_max(m: CMat) -> CMat {
    let s = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if s > 0.0 {
        m / c(s, 0.0)
    } else {
        m
    }
}

/// Direction of `lim_k ((m + r)/2r)^k` for a matrix of spectral radius `r`
/// whose eigenvalue `r` is the only one on the circle `|z + r| = 2r`. For a
/// positive map this is the spectral projector onto its fixed space.
pub fn dominant_projector(m: &CMat, r: f64, squarings: usize) -> CMat {
    let n = m.nrows();
    let mut p = (m + identity(n) * c(r, 0.0)) * c(0.5 / r, 0.0);
    for _ in 0..squarings {
        p = normalize_max(&p * &p);
    }
    p
}

/// All eigenvalues of a general complex matrix via the complex Schur form.
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    assert!(m.is_square());
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or_else(|| Error::Convergence("complex Schur decomposition did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

/// Sort by descending modulus; ties broken by real then imaginary part so
/// the order is reproducible.
pub fn sort_by_modulus_desc(values: &mut [C64]) {
    values.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues are returned in
/// descending order (stable with respect to the solver's output order) with
/// the matching eigenvectors as columns.
pub fn hermitian_eigh(h: &CMat) -> (Vec<f64>, CMat) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = hermitian_part(h).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(h: &CMat) -> Vec<f64> {
    hermitian_eigh(h).0
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(h: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = hermitian_eigh(h);
    let d = CMat::from_diagonal(&CVec::from_iterator(vals.len(), vals.iter().map(|&v| c(f(v), 0.0))));
    &vecs * d * vecs.adjoint()
}

/// Square root of a positive semidefinite matrix; negative roundoff is clipped.
pub fn psd_sqrt(h: &CMat) -> CMat {
    hermitian_fn(h, |v| v.max(0.0).sqrt())
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm_hermitian(h: &CMat) -> f64 {
    hermitian_eigenvalues(h).iter().map(|v| v.abs()).sum()
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn condition_number(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Numerical rank: singular values above `rel_tol * σ_max`.
pub fn rank(m: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&hi) if hi > 0.0 => s.iter().filter(|&&v| v > rel_tol * hi).count(),
        _ => 0,
    }
}

/// Orthonormal basis (as columns) of the kernel of a square matrix, using
/// singular values at or below `rel_tol * σ_max`.
pub fn null_space(m: &CMat, rel_tol: f64) -> CMat {
    assert!(m.is_square());
    let n = m.nrows();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sigma = &svd.singular_values;
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let cols: Vec<usize> = (0..sigma.len())
        .filter(|&k| sigma[k] <= rel_tol * smax || smax == 0.0)
        .collect();
    CMat::from_fn(n, cols.len(), |r, k| v_t[(cols[k], r)].conj())
}

/// Orthonormal basis of the column space of `m`.
pub fn column_space(m: &CMat, rel_tol: f64) -> CMat {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return CMat::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let sigma = &svd.singular_values;
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let cols: Vec<usize> = (0..sigma.len()).filter(|&k| smax > 0.0 && sigma[k] > rel_tol * smax).collect();
    CMat::from_fn(rows, cols.len(), |r, k| u[(r, cols[k])])
}

/// Orthonormal basis of the orthogonal complement of the span of `q`'s columns
/// (which must already be orthonormal) in `C^n`.
pub fn orthogonal_complement(q: &CMat) -> CMat {
    let n = q.nrows();
    let proj = identity(n) - q * q.adjoint();
    column_space(&proj, 1e-8)
}

pub fn random_gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-random unitary: QR of a Ginibre matrix with the phases of `diag(R)`
/// moved into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = random_gaussian_matrix(n, n, rng);
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for row in 0..n {
            q[(row, k)] *= phase;
        }
    }
    q
}

/// Least-squares slope and intercept of `ys` against `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vectorization_realizes_sandwich_as_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_gaussian_matrix(3, 3, &mut rng);
        let b = random_gaussian_matrix(2, 2, &mut rng);
        let x = random_gaussian_matrix(3, 2, &mut rng);
        let lhs = vec_row(&(&a * &x * b.adjoint()));
        let rhs = kron(&a, &b.map(|z| z.conj())) * vec_row(&x);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn mat_pow_matches_repeated_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_gaussian_matrix(4, 4, &mut rng) * c(0.5, 0.0);
        let mut direct = identity(4);
        for _ in 0..7 {
            direct = &direct * &m;
        }
        assert!((mat_pow(&m, 7) - direct).norm() < 1e-10);
        assert_eq!(mat_pow(&m, 0), identity(4));
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_unitary(5, &mut rng);
        assert!((u.adjoint() * &u - identity(5)).norm() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_triangular_matrix() {
        let m = CMat::from_row_slice(3, 3, &[c(2.0, 0.0), ONE, ZERO, ZERO, c(0.0, 1.0), ONE, ZERO, ZERO, c(-1.0, 0.0)]);
        let mut ev = eigenvalues(&m).unwrap();
        sort_by_modulus_desc(&mut ev);
        assert!((ev[0] - c(2.0, 0.0)).norm() < 1e-12);
        assert!((ev[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_space_of_rank_deficient_matrix() {
        let m = CMat::from_row_slice(2, 2, &[ONE, ONE, ONE, ONE]);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.ncols(), 1);
        assert!((&m * &ns).norm() < 1e-12);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let (s, i) = linear_fit(&xs, &ys);
        assert!((s - 3.0).abs() < 1e-12 && (i + 1.0).abs() < 1e-12);
    }
}
