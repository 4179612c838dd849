//! Dense complex matrix helpers shared by the system model and the solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn frob_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `diag(a) * m`, scaling row `k` by `a[k]`.
pub fn diag_mul(a: &CVec, m: &CMat) -> CMat {
    assert_eq!(a.len(), m.nrows(), "diag_mul: length mismatch");
    let mut out = m.clone();
    for (k, mut row) in out.row_iter_mut().enumerate() {
        row *= a[k];
    }
    out
}

/// `m * diag(a)`, scaling column `k` by `a[k]`.
pub fn mul_diag(m: &CMat, a: &CVec) -> CMat {
    assert_eq!(a.len(), m.ncols(), "mul_diag: length mismatch");
    let mut out = m.clone();
    for (k, mut col) in out.column_iter_mut().enumerate() {
        col *= a[k];
    }
    out
}

/// Dense `diag(a)`.
pub fn diag_matrix(a: &CVec) -> CMat {
    CMat::from_diagonal(a)
}

/// Column-major vectorization.
pub fn vec_of(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

/// Khatri–Rao (column-wise Kronecker) product. Column `k` of the result is
/// `kron(a[:, k], b[:, k])`.
pub fn khatri_rao(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.ncols(), "khatri_rao: column count mismatch");
    let (ma, mb) = (a.nrows(), b.nrows());
    CMat::from_fn(ma * mb, a.ncols(), |r, k| a[(r / mb, k)] * b[(r % mb, k)])
}

/// Numerical rank with singular values below `rel_tol * sigma_max` treated as zero.
pub fn numerical_rank(m: &CMat, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Largest deviation from Hermitian symmetry, relative to the largest entry.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        / scale
}

/// Sorted (ascending) eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `m^{-1/2}` for a Hermitian positive definite matrix.
pub fn hermitian_inv_sqrt(m: &CMat) -> Option<CMat> {
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
        return None;
    }
    let scale = CVec::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| c(1.0 / l.sqrt(), 0.0)),
    );
    let q = &eig.eigenvectors;
    Some(mul_diag(q, &scale) * q.adjoint())
}

/// Outcome of a guarded Hermitian solve.
#[derive(Debug, Clone)]
pub struct GuardedSolve {
    pub x: CMat,
    /// Set when a ridge had to be added (singular or badly conditioned system).
    pub regularized: bool,
}

/// Solves `a x = b` for Hermitian positive semidefinite `a`.
///
/// The system is first equilibrated by its diagonal, so badly scaled but
/// well-posed systems are solved exactly. A Cholesky factorization of the
/// equilibrated matrix is used; when it fails or its condition estimate
/// (squared ratio of extreme Cholesky pivots) exceeds `cond_limit`, the
/// equilibrated system is shifted by `ridge_frac * trace` and the result is
/// flagged. Unknowns with a zero diagonal entry are set to zero.
pub fn solve_hermitian_guarded(
    a: &CMat,
    b: &CMat,
    cond_limit: f64,
    ridge_frac: f64,
) -> GuardedSolve {
    let n = a.nrows();
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let d = a[(i, i)].re;
            if d > 0.0 && d.is_finite() {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let active = scale.iter().filter(|&&s| s > 0.0).count();
    if active == 0 {
        return GuardedSolve {
            x: CMat::zeros(n, b.ncols()),
            regularized: true,
        };
    }
    let mut eq = CMat::from_fn(n, n, |i, j| a[(i, j)] * (scale[i] * scale[j]));
    for i in 0..n {
        if scale[i] == 0.0 {
            eq[(i, i)] = c(1.0, 0.0);
        }
    }
    let rhs = CMat::from_fn(n, b.ncols(), |i, j| b[(i, j)] * scale[i]);
    let unscale = |y: CMat| CMat::from_fn(n, y.ncols(), |i, j| y[(i, j)] * scale[i]);

    let mut regularized = active < n;
    if let Some(ch) = eq.clone().cholesky() {
        let l = ch.l_dirty();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for i in 0..n {
            let d = l[(i, i)].re.abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let cond = if lo > 0.0 {
            (hi / lo).powi(2)
        } else {
            f64::INFINITY
        };
        if cond <= cond_limit {
            return GuardedSolve {
                x: unscale(ch.solve(&rhs)),
                regularized,
            };
        }
    }
    regularized = true;
    let ridge = ridge_frac * trace_re(&eq);
    for i in 0..n {
        eq[(i, i)] += c(ridge, 0.0);
    }
    let y = match eq.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => eq
            .lu()
            .solve(&rhs)
            .unwrap_or_else(|| CMat::zeros(n, rhs.ncols())),
    };
    GuardedSolve {
        x: unscale(y),
        regularized,
    }
}

/// Standard circularly symmetric complex Gaussian draw, `CN(0, 1)`.
pub fn cn01<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    use rand_distr::{Distribution, StandardNormal};
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cn_matrix<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cn01(rng))
}

pub fn cn_vector<R: rand::Rng + ?Sized>(len: usize, rng: &mut R) -> CVec {
    CVec::from_fn(len, |_, _| cn01(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn khatri_rao_linearizes_diagonal_sandwich() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = cn_matrix(5, 3, &mut rng);
        let v = cn_matrix(3, 4, &mut rng);
        let a = cn_vector(3, &mut rng);
        let lhs = vec_of(&(&u * diag_matrix(&a) * &v));
        let rhs = khatri_rao(&v.transpose(), &u) * &a;
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn diag_helpers_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = cn_matrix(3, 3, &mut rng);
        let a = cn_vector(3, &mut rng);
        assert!((diag_mul(&a, &m) - diag_matrix(&a) * &m).norm() < 1e-14);
        assert!((mul_diag(&m, &a) - &m * diag_matrix(&a)).norm() < 1e-14);
    }

    #[test]
    fn guarded_solve_flags_singular_systems() {
        let a = CMat::from_element(2, 2, c(1.0, 0.0));
        let b = CMat::from_element(2, 1, c(1.0, 0.0));
        let s = solve_hermitian_guarded(&a, &b, 1e12, 1e-10);
        assert!(s.regularized);
        assert!(s.x.iter().all(|z| z.re.is_finite()));

        let zero = CMat::zeros(2, 2);
        let s = solve_hermitian_guarded(&zero, &b, 1e12, 1e-10);
        assert!(s.regularized);
        assert_eq!(s.x, CMat::zeros(2, 1));
    }

    #[test]
    fn badly_scaled_systems_solve_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = cn_matrix(4, 4, &mut rng);
        let s = CVec::from_vec(vec![c(1e-8, 0.0), c(1.0, 0.0), c(1e5, 0.0), c(1e-3, 0.0)]);
        let base = &g * g.adjoint() + CMat::identity(4, 4);
        let a = diag_mul(&s, &mul_diag(&base, &s));
        let x_true = cn_matrix(4, 1, &mut rng);
        let b = &a * &x_true;
        let sol = solve_hermitian_guarded(&a, &b, 1e12, 1e-10);
        assert!(!sol.regularized);
        assert!((&a * &sol.x - &b).norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn inverse_square_root_whitens() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = cn_matrix(4, 4, &mut rng);
        let m = &g * g.adjoint() + CMat::identity(4, 4);
        let w = hermitian_inv_sqrt(&m).unwrap();
        let id = &w * &m * w.adjoint();
        assert!((id - CMat::identity(4, 4)).norm() < 1e-10);
    }
}
