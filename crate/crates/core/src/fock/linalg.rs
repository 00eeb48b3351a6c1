use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub(crate) fn split(m: &DMatrix<Complex64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

pub(crate) fn join(re: &DMatrix<f64>, im: &DMatrix<f64>) -> DMatrix<Complex64> {
    re.zip_map(im, Complex64::new)
}

/// `U ρ Uᵀ` for real `U`, done as real products on the real and imaginary parts.
pub(crate) fn conjugate_real(u: &DMatrix<f64>, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (re, im) = split(rho);
    let ut = u.transpose();
    let re = u * re * &ut;
    let im = u * im * &ut;
    join(&re, &im)
}

/// Eigenvalues of a Hermitian matrix `A + iB` via the real symmetric embedding
/// `[[A, −B], [B, A]]`, whose spectrum repeats each eigenvalue twice.
pub(crate) fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let n = m.nrows();
    let cutoff = 1e-60 * m.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let big = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let mut z = m[(i % n, j % n)];
        // entries spanning hundreds of decades derail the QR sweeps
        if z.norm() < cutoff {
            z = Complex64::new(0.0, 0.0);
        }
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(big).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev.into_iter().step_by(2).collect()
}
