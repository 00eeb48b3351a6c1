//! Truncated Fock-basis density matrices: the full-quantum reference backend.

mod kernel;
mod linalg;
mod wigner;

pub use kernel::{characteristic_function, ChiEvaluator, ProbeOperator, QuadratureKernel};
pub use wigner::{position_distribution, momentum_distribution, wigner_grid, WignerGrid};

use crate::error::{invalid, require_non_negative, Error, Result};
use crate::phase_space::{quench_squeeze_parameter, GaussianState, LambDicke, Visibility};
use linalg::{conjugate_real, hermitian_eigenvalues};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// Default truncation.
pub const DEFAULT_DIM: usize = 200;
/// Truncation used when the default leaks population into the top levels.
pub const ESCALATED_DIM: usize = 400;
/// Largest population tolerated in the top 10% of levels.
pub const TAIL_LIMIT: f64 = 1e-6;

const TRACE_TOL: f64 = 1e-9;
const HERMITIAN_TOL: f64 = 1e-12;

/// Density matrix on the number states `|0⟩ … |dim−1⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    rho: DMatrix<Complex64>,
}

impl FockDensityMatrix {
    /// Validate trace and Hermiticity. Positivity is checked separately by
    /// [`min_eigenvalue`](Self::min_eigenvalue) because it costs a diagonalization.
    pub fn from_matrix(rho: DMatrix<Complex64>) -> Result<Self> {
        if rho.nrows() == 0 || rho.nrows() != rho.ncols() {
            return Err(invalid("rho", "must be a non-empty square matrix"));
        }
        let s = FockDensityMatrix { rho };
        let tr = s.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(invalid("rho", format!("trace {tr} differs from 1")));
        }
        let herm = s.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(invalid("rho", format!("not Hermitian (deviation {herm:e})")));
        }
        Ok(s)
    }

    pub fn from_populations(populations: &[f64]) -> Result<Self> {
        if populations.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("populations", "must be finite and non-negative"));
        }
        let n = populations.len();
        let rho = DMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(populations[i], 0.0) } else { Complex64::new(0.0, 0.0) });
        Self::from_matrix(rho)
    }

    /// Pure state from (unnormalized) amplitudes, padded to `dim`.
    pub fn pure(amplitudes: &[Complex64], dim: usize) -> Result<Self> {
        if amplitudes.is_empty() || amplitudes.len() > dim {
            return Err(invalid("amplitudes", format!("need 1..={dim} amplitudes")));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(invalid("amplitudes", "zero or non-finite norm"));
        }
        let psi: Vec<Complex64> = amplitudes.iter().map(|a| a / norm).collect();
        let rho = DMatrix::from_fn(dim, dim, |i, j| match (psi.get(i), psi.get(j)) {
            (Some(a), Some(b)) => a * b.conj(),
            _ => Complex64::new(0.0, 0.0),
        });
        Self::from_matrix(rho)
    }

    pub fn number_state(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(invalid("n", format!("level {n} outside dim {dim}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); n + 1];
        amps[n] = Complex64::new(1.0, 0.0);
        Self::pure(&amps, dim)
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::number_state(0, dim)
    }

    /// Coherent state with `⟨a⟩ = beta`.
    pub fn coherent(beta: Complex64, dim: usize) -> Result<Self> {
        let mut amps = Vec::with_capacity(dim);
        let mut a = Complex64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
        for n in 0..dim {
            amps.push(a);
            a = a * beta / ((n + 1) as f64).sqrt();
        }
        let s = Self::pure(&amps, dim)?;
        s.check_tail(TAIL_LIMIT)?;
        Ok(s)
    }

    /// Boltzmann populations `n̄ⁿ/(n̄+1)^{n+1}`, renormalized after truncation.
    pub fn thermal(nbar: f64, dim: usize) -> Result<Self> {
        require_non_negative("nbar", nbar)?;
        if dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        let ratio = nbar / (nbar + 1.0);
        let mut pops = Vec::with_capacity(dim);
        let mut p = 1.0 / (nbar + 1.0);
        for _ in 0..dim {
            pops.push(p);
            p *= ratio;
        }
        let total: f64 = pops.iter().sum();
        pops.iter_mut().for_each(|x| *x /= total);
        let s = Self::from_populations(&pops)?;
        s.check_tail(TAIL_LIMIT)?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.rho[(i, i)].re).collect()
    }

    pub fn mean_number(&self) -> f64 {
        self.populations().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Population in the top 10% of levels.
    pub fn tail_mass(&self) -> f64 {
        let n = self.dim();
        let start = n - n.div_ceil(10);
        (start..n).map(|i| self.rho[(i, i)].re).sum()
    }

    pub fn check_tail(&self, limit: f64) -> Result<()> {
        let leakage = self.tail_mass();
        if leakage > limit {
            return Err(Error::Truncation { dim: self.dim(), leakage, limit });
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.rho).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// `½‖ρ − σ‖₁` between states of equal dimension.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(invalid("other", "dimension mismatch"));
        }
        let diff = &self.rho - &other.rho;
        Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>())
    }

    /// Zero-pad or truncate to another dimension (used for convergence checks).
    pub fn resized(&self, dim: usize) -> Result<Self> {
        let n = self.dim();
        let rho = DMatrix::from_fn(dim, dim, |i, j| if i < n && j < n { self.rho[(i, j)] } else { Complex64::new(0.0, 0.0) });
        let s = FockDensityMatrix { rho };
        let tr = s.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::Truncation { dim, leakage: 1.0 - tr, limit: TRACE_TOL });
        }
        Ok(s)
    }

    /// Number of leading levels carrying all but `eps` of the population.
    pub fn support(&self, eps: f64) -> usize {
        let pops = self.populations();
        let mut tail = 0.0;
        for (i, p) in pops.iter().enumerate().rev() {
            tail += p.max(0.0);
            if tail > eps {
                return i + 1;
            }
        }
        1
    }

    /// `⟨a⟩`, `⟨a²⟩` and `⟨a†a⟩`.
    fn ladder_moments(&self) -> (Complex64, Complex64, f64) {
        let n = self.dim();
        let mut a1 = Complex64::new(0.0, 0.0);
        let mut a2 = Complex64::new(0.0, 0.0);
        for m in 1..n {
            a1 += self.rho[(m, m - 1)] * (m as f64).sqrt();
        }
        for m in 2..n {
            a2 += self.rho[(m, m - 2)] * ((m * (m - 1)) as f64).sqrt();
        }
        (a1, a2, self.mean_number())
    }

    /// First and second quadrature moments as a Gaussian summary.
    pub fn moments(&self) -> Result<GaussianState> {
        let (a1, a2, nn) = self.ladder_moments();
        let (mq, mp) = (2.0 * a1.re, 2.0 * a1.im);
        let qq = 2.0 * a2.re + 2.0 * nn + 1.0 - mq * mq;
        let pp = -2.0 * a2.re + 2.0 * nn + 1.0 - mp * mp;
        let qp = 2.0 * a2.im - mq * mp;
        GaussianState::from_moments([mq, mp], [[qq, qp], [qp, pp]])
    }

    /// `(Πρ)_{nm} = (−1)ⁿ ρ_{nm}` with `Π` the parity operator.
    pub fn parity_applied(&self) -> DMatrix<Complex64> {
        let mut out = self.rho.clone();
        for i in (1..self.dim()).step_by(2) {
            out.row_mut(i).iter_mut().for_each(|x| *x = -*x);
        }
        out
    }

    pub fn evolve_kerr_diagonal(&self, omega: f64, kerr: f64, t: f64) -> Self {
        let n = self.dim();
        let phase: Vec<Complex64> = (0..n)
            .map(|k| {
                let e = omega * k as f64 + kerr * (k * k) as f64;
                Complex64::from_polar(1.0, -e * t)
            })
            .collect();
        let rho = DMatrix::from_fn(n, n, |i, j| self.rho[(i, j)] * phase[i] * phase[j].conj());
        FockDensityMatrix { rho }
    }

    /// Unitary squeeze `Ŝ(ζ) ρ Ŝ(ζ)†`, `ζ = s·e^{iθ}`, built by exponentiating
    /// the quadratic generator in the truncated basis.
    pub fn squeeze(&self, s: f64, theta: f64) -> Result<Self> {
        if !s.is_finite() || !theta.is_finite() {
            return Err(invalid("squeeze", "non-finite parameter"));
        }
        if s == 0.0 {
            return Ok(self.clone());
        }
        let n = self.dim();
        let u = squeeze_unitary_real(s, n);
        // Ŝ(S e^{iθ}) = P Ŝ(S) P† with P = exp(iθn/2).
        let ph: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, 0.5 * theta * k as f64)).collect();
        let rotated = DMatrix::from_fn(n, n, |i, j| self.rho[(i, j)] * ph[i].conj() * ph[j]);
        let mid = conjugate_real(&u, &rotated);
        let rho = DMatrix::from_fn(n, n, |i, j| mid[(i, j)] * ph[i] * ph[j].conj());
        let out = FockDensityMatrix { rho };
        out.check_tail(TAIL_LIMIT)?;
        Ok(out)
    }

    /// Re-express the state in the units of a new trap (a squeeze with
    /// `S = ½ ln(ω_from/ω_to)`).
    pub fn quench_rescale(&self, omega_from: f64, omega_to: f64) -> Result<Self> {
        crate::error::require_positive("omega_from", omega_from)?;
        crate::error::require_positive("omega_to", omega_to)?;
        self.squeeze(quench_squeeze_parameter(omega_from, omega_to), 0.0)
    }

    pub fn characteristic(&self, xi_q: f64, xi_p: f64) -> Complex64 {
        characteristic_function(self, xi_q, xi_p)
    }

    pub fn visibility(&self, eta: LambDicke) -> Visibility {
        Visibility::from_chi(self.characteristic(2.0 * eta.value(), 0.0))
    }
}

/// Real matrix of `Ŝ(s)` for `θ = 0`: `exp(s·½(a² − a†²))`.
fn squeeze_unitary_real(s: f64, n: usize) -> DMatrix<f64> {
    let mut g = DMatrix::<f64>::zeros(n, n);
    for k in 0..n.saturating_sub(2) {
        let c = 0.5 * s * (((k + 1) * (k + 2)) as f64).sqrt();
        g[(k, k + 2)] = c;
        g[(k + 2, k)] = -c;
    }
    g.exp()
}

pub fn fock_squeezed_thermal(nbar: f64, s: f64, theta: f64, dim: usize) -> Result<FockDensityMatrix> {
    FockDensityMatrix::thermal(nbar, dim)?.squeeze(s, theta)
}

/// [`fock_squeezed_thermal`] at the default dimension, escalating once on tail leakage.
pub fn fock_squeezed_thermal_auto(nbar: f64, s: f64, theta: f64) -> Result<FockDensityMatrix> {
    match fock_squeezed_thermal(nbar, s, theta, DEFAULT_DIM) {
        Err(Error::Truncation { .. }) => fock_squeezed_thermal(nbar, s, theta, ESCALATED_DIM),
        other => other,
    }
}

pub fn evolve_kerr_diagonal(rho: &FockDensityMatrix, omega: f64, kerr: f64, t: f64) -> FockDensityMatrix {
    rho.evolve_kerr_diagonal(omega, kerr, t)
}

pub fn apply_squeeze_fock(rho: &FockDensityMatrix, s: f64, theta: f64) -> Result<FockDensityMatrix> {
    rho.squeeze(s, theta)
}

/// Spectral propagator for `H = (ω/4)(p² + q²) + (K/6)q⁴` in the truncated basis.
///
/// Diagonalizing once makes every evolution exact up to truncation, so no
/// time-step convergence check is needed.
#[derive(Debug, Clone)]
pub struct QuarticPropagator {
    energies: Vec<f64>,
    basis: DMatrix<f64>,
}

impl QuarticPropagator {
    pub fn new(omega: f64, kerr: f64, dim: usize) -> Result<Self> {
        crate::error::require_positive("omega", omega)?;
        if !kerr.is_finite() {
            return Err(invalid("kerr", "non-finite"));
        }
        let q4 = q_fourth_power(dim);
        let h = DMatrix::from_fn(dim, dim, |i, j| {
            let harmonic = if i == j { omega * (i as f64 + 0.5) } else { 0.0 };
            harmonic + kerr / 6.0 * q4[(i, j)]
        });
        let eig = SymmetricEigen::new(h);
        Ok(QuarticPropagator { energies: eig.eigenvalues.iter().copied().collect(), basis: eig.eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn evolve(&self, rho: &FockDensityMatrix, t: f64) -> Result<FockDensityMatrix> {
        if rho.dim() != self.dim() {
            return Err(invalid("rho", "dimension differs from the propagator"));
        }
        let vt = self.basis.transpose();
        let mut tilde = conjugate_real(&vt, rho.matrix());
        let ph: Vec<Complex64> = self.energies.iter().map(|e| Complex64::from_polar(1.0, -e * t)).collect();
        let n = self.dim();
        for j in 0..n {
            for i in 0..n {
                tilde[(i, j)] *= ph[i] * ph[j].conj();
            }
        }
        let mut out = conjugate_real(&self.basis, &tilde);
        // restore exact Hermiticity lost to rounding
        let adj = out.adjoint();
        out = (out + adj) * Complex64::new(0.5, 0.0);
        Ok(FockDensityMatrix { rho: out })
    }
}

pub fn evolve_quartic(rho: &FockDensityMatrix, omega: f64, kerr: f64, t: f64) -> Result<FockDensityMatrix> {
    if kerr == 0.0 {
        return Ok(rho.evolve_kerr_diagonal(omega, 0.0, t));
    }
    QuarticPropagator::new(omega, kerr, rho.dim())?.evolve(rho, t)
}

/// Position quadrature `q = a + a†` truncated to `dim` levels.
pub fn q_matrix(dim: usize) -> DMatrix<f64> {
    let mut q = DMatrix::<f64>::zeros(dim, dim);
    for n in 0..dim.saturating_sub(1) {
        let v = ((n + 1) as f64).sqrt();
        q[(n, n + 1)] = v;
        q[(n + 1, n)] = v;
    }
    q
}

/// `q⁴` restricted to `dim` levels, computed in a padded basis so that every
/// retained matrix element is exact.
pub fn q_fourth_power(dim: usize) -> DMatrix<f64> {
    let q = q_matrix(dim + 4);
    let q2 = &q * &q;
    let q4 = &q2 * &q2;
    q4.view((0, 0), (dim, dim)).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn vacuum_squeeze_zero_is_vacuum() {
        let r = fock_squeezed_thermal(0.0, 0.0, 0.0, 40).unwrap();
        assert_eq!(r, FockDensityMatrix::vacuum(40).unwrap());
    }

    #[test]
    fn squeezed_vacuum_variance() {
        let r = fock_squeezed_thermal(0.0, 1.0, 0.0, DEFAULT_DIM).unwrap();
        let m = r.moments().unwrap();
        assert!((m.covariance()[0][0] - (-2.0f64).exp()).abs() < 1e-9);
        let r = apply_squeeze_fock(&FockDensityMatrix::vacuum(DEFAULT_DIM).unwrap(), 0.5414, 0.0).unwrap();
        assert!((r.moments().unwrap().covariance()[0][0] - 0.3386).abs() < 1e-4);
    }

    #[test]
    fn squeeze_angle_matches_gaussian() {
        let r = fock_squeezed_thermal(0.3, 0.7, 1.1, 120).unwrap();
        let g = crate::phase_space::thermal_state(0.3).unwrap().squeeze(0.7, 1.1);
        let (a, b) = (r.moments().unwrap().covariance(), g.covariance());
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - b[i][j]).abs() < 1e-9, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn squeeze_inverse() {
        let r = fock_squeezed_thermal(0.5, 0.4, 0.3, 100).unwrap();
        let back = r.squeeze(0.6, 0.9).unwrap().squeeze(-0.6, 0.9).unwrap();
        assert!(r.trace_distance(&back).unwrap() < 1e-9);
        assert!((back.trace().re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn harmonic_revival() {
        let r = fock_squeezed_thermal(0.2, 0.5, 0.0, 80).unwrap();
        let out = r.evolve_kerr_diagonal(3.0, 0.0, 2.0 * PI / 3.0);
        let err = (&out.rho - &r.rho).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn q4_diagonal_elements() {
        let q4 = q_fourth_power(12);
        for n in 0..=10 {
            let nf = n as f64;
            let want = 6.0 * nf * nf + 6.0 * nf + 3.0;
            assert!((q4[(n, n)] - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn quartic_without_kerr_is_harmonic() {
        let r = fock_squeezed_thermal(0.5, 0.5, 0.0, 60).unwrap();
        let prop = QuarticPropagator::new(2.0, 0.0, 60).unwrap();
        let a = prop.evolve(&r, 0.7).unwrap();
        let b = r.evolve_kerr_diagonal(2.0, 0.0, 0.7);
        assert!(a.trace_distance(&b).unwrap() < 1e-9);
    }

    #[test]
    fn thermal_truncation_error() {
        assert!(matches!(FockDensityMatrix::thermal(5.0, 20), Err(Error::Truncation { .. })));
        assert!(fock_squeezed_thermal_auto(0.0, 1.8, 0.0).unwrap().dim() >= DEFAULT_DIM);
    }

    #[test]
    fn coherent_state_moments() {
        let r = FockDensityMatrix::coherent(Complex64::new(0.5, -0.25), 40).unwrap();
        let m = r.moments().unwrap();
        assert!((m.mean()[0] - 1.0).abs() < 1e-12);
        assert!((m.mean()[1] + 0.5).abs() < 1e-12);
        assert!((m.covariance()[0][0] - 1.0).abs() < 1e-10);
    }
}
