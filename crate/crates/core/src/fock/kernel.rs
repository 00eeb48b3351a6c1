//! `χ(ξ) = Tr[ρ exp(i(ξ_q q + ξ_p p))]` in the truncated basis.
//!
//! With `q = V diag(λ) Vᵀ` and `ξ = r(cos φ, sin φ)`, the generator is
//! `e^{iφn} r q e^{−iφn}`, so
//! `χ = Σ_k e^{irλ_k} Σ_d e^{iφd} F_k(d)` with
//! `F_k(d) = Σ_n ρ_{n,n+d} V_{n+d,k} V_{n,k}`. `F` depends only on the state and is
//! built once per state; each χ point then costs `O(dim · support)`.

use super::{q_matrix, FockDensityMatrix};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Populations below this are treated as outside the state's support.
const SUPPORT_EPS: f64 = 1e-15;

/// Eigen-decomposition of the truncated position quadrature.
#[derive(Debug)]
pub struct QuadratureKernel {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl QuadratureKernel {
    pub fn new(dim: usize) -> Self {
        let eig = SymmetricEigen::new(q_matrix(dim));
        QuadratureKernel { values: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors }
    }

    /// Process-wide cached kernel for a dimension.
    pub fn shared(dim: usize) -> Arc<QuadratureKernel> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureKernel>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("kernel cache poisoned");
        guard.entry(dim).or_insert_with(|| Arc::new(QuadratureKernel::new(dim))).clone()
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `exp(i r q)` as a dense matrix.
    pub fn exp_iq(&self, r: f64) -> DMatrix<Complex64> {
        let n = self.dim();
        let ph: Vec<Complex64> = self.values.iter().map(|l| Complex64::from_polar(1.0, r * l)).collect();
        let scaled = DMatrix::from_fn(n, n, |i, k| ph[k].re * self.vectors[(i, k)]);
        let scaled_im = DMatrix::from_fn(n, n, |i, k| ph[k].im * self.vectors[(i, k)]);
        let vt = self.vectors.transpose();
        let re = scaled * &vt;
        let im = scaled_im * &vt;
        re.zip_map(&im, Complex64::new)
    }
}

/// Precomputed `F_k(d)` for fast χ evaluation at many points.
#[derive(Debug)]
pub struct ChiEvaluator {
    kernel: Arc<QuadratureKernel>,
    support: usize,
    // f[k * width + (d + support - 1)]
    f: Vec<Complex64>,
}

impl ChiEvaluator {
    pub fn new(state: &FockDensityMatrix) -> Self {
        Self::from_matrix(state.matrix(), state.support(SUPPORT_EPS))
    }

    /// Evaluator for `Tr[Πρ …]`, the displacement-parity form of the Wigner function.
    pub fn with_parity(state: &FockDensityMatrix) -> Self {
        Self::from_matrix(&state.parity_applied(), state.support(SUPPORT_EPS))
    }

    fn from_matrix(rho: &DMatrix<Complex64>, support: usize) -> Self {
        let kernel = QuadratureKernel::shared(rho.nrows());
        let n = kernel.dim();
        let s = support.min(n);
        let width = 2 * s - 1;
        let v = &kernel.vectors;
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut row = vec![Complex64::new(0.0, 0.0); width];
                for a in 0..s {
                    let va = v[(a, k)];
                    for b in 0..s {
                        // d = b - a, element ρ_{a,b}
                        row[b + s - 1 - a] += rho[(a, b)] * (va * v[(b, k)]);
                    }
                }
                row
            })
            .collect();
        ChiEvaluator { kernel, support: s, f: rows.concat() }
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn eval(&self, xi_q: f64, xi_p: f64) -> Complex64 {
        let r = xi_q.hypot(xi_p);
        let phi = xi_p.atan2(xi_q);
        let s = self.support;
        let width = 2 * s - 1;
        let w: Vec<Complex64> = (0..width).map(|i| Complex64::from_polar(1.0, phi * (i as f64 - (s - 1) as f64))).collect();
        let mut total = Complex64::new(0.0, 0.0);
        for (k, lam) in self.kernel.values.iter().enumerate() {
            let row = &self.f[k * width..(k + 1) * width];
            let c: Complex64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
            total += Complex64::from_polar(1.0, r * lam) * c;
        }
        total
    }
}

/// Fixed probe `exp(i r q)` applied to many states (visibility traces).
#[derive(Debug, Clone)]
pub struct ProbeOperator {
    e: DMatrix<Complex64>,
}

impl ProbeOperator {
    pub fn new(dim: usize, r: f64) -> Self {
        ProbeOperator { e: QuadratureKernel::shared(dim).exp_iq(r) }
    }

    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    /// `Tr[ρ exp(i r q)]`, summed over the state's support.
    pub fn expectation(&self, state: &FockDensityMatrix) -> Complex64 {
        let s = state.support(SUPPORT_EPS).min(self.dim());
        let rho = state.matrix();
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..s {
            for n in 0..s {
                acc += rho[(n, m)] * self.e[(m, n)];
            }
        }
        acc
    }
}

/// Single-point characteristic function.
pub fn characteristic_function(state: &FockDensityMatrix, xi_q: f64, xi_p: f64) -> Complex64 {
    if xi_q == 0.0 && xi_p == 0.0 {
        return state.trace();
    }
    if xi_p == 0.0 {
        return ProbeOperator::new(state.dim(), xi_q).expectation(state);
    }
    ChiEvaluator::new(state).eval(xi_q, xi_p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::fock_squeezed_thermal;
    use crate::phase_space::thermal_state;

    #[test]
    fn vacuum_sql() {
        let v = FockDensityMatrix::vacuum(200).unwrap();
        let chi = characteristic_function(&v, 2.0 * 0.316, 0.0);
        assert!((chi.re - (-2.0f64 * 0.316 * 0.316).exp()).abs() < 1e-12);
        assert!(chi.im.abs() < 1e-12);
        assert_eq!(characteristic_function(&v, 0.0, 0.0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn gaussian_characteristic_all_directions() {
        let r = fock_squeezed_thermal(0.4, 0.6, 0.8, 160).unwrap();
        let g = thermal_state(0.4).unwrap().squeeze(0.6, 0.8);
        let ev = ChiEvaluator::new(&r);
        for i in 0..12 {
            let xi = [0.4 * (i as f64).cos() * (1.0 + 0.2 * i as f64), 0.5 * (i as f64).sin()];
            let a = ev.eval(xi[0], xi[1]);
            let b = g.characteristic(xi);
            assert!((a - b).norm() < 1e-10, "{xi:?}: {a} vs {b}");
        }
    }

    #[test]
    fn probe_matches_evaluator() {
        let r = fock_squeezed_thermal(0.5, -0.5, 0.3, 120).unwrap();
        let a = ProbeOperator::new(120, 0.7).expectation(&r);
        let b = ChiEvaluator::new(&r).eval(0.7, 0.0);
        assert!((a - b).norm() < 1e-12);
    }
}
