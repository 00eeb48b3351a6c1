//! Two-port fringe model `N_A = C_A[1 + V cos(φ + φ₀)]`, `N_B = C_B[1 − V cos(φ + φ₀)]`.
//!
//! The characteristic-function phase is `α = φ₀ + π/2`, so the asymmetry
//! `(N_A/C_A − N_B/C_B)/2 = V sin(φ + α)`.

use crate::error::{invalid, Error, Result};
use crate::numeric::stream_rng;
use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub phases: Vec<f64>,
    pub counts_a: Vec<u64>,
    pub counts_b: Vec<u64>,
}

impl FringeScan {
    pub fn new(phases: Vec<f64>, counts_a: Vec<u64>, counts_b: Vec<u64>) -> Result<Self> {
        if phases.len() != counts_a.len() || phases.len() != counts_b.len() {
            return Err(invalid("counts", "phases and both count arrays must have equal length"));
        }
        let mut distinct: Vec<f64> = phases.iter().map(|p| p.rem_euclid(2.0 * PI)).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        if distinct.len() < 4 {
            return Err(invalid("phases", "need at least 4 distinct phases"));
        }
        Ok(FringeScan { phases, counts_a, counts_b })
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

/// Expected counts `(μ_A, μ_B)` at phase `phi`.
pub fn fringe_means(v: f64, phi0: f64, c_a: f64, c_b: f64, phi: f64) -> (f64, f64) {
    let c = (phi + phi0).cos();
    (c_a * (1.0 + v * c), c_b * (1.0 - v * c))
}

/// Poisson counts around the model. `alpha` is the characteristic-function
/// phase; each phase point draws from its own stream.
pub fn simulate_fringe(v: f64, alpha: f64, c_a: f64, c_b: f64, phases: &[f64], seed: u64) -> Result<FringeScan> {
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid("V", format!("must lie in [0, 1], got {v}")));
    }
    if !(c_a > 0.0 && c_b > 0.0) {
        return Err(invalid("C_A", "both count scales must be positive"));
    }
    let phi0 = alpha - FRAC_PI_2;
    let draw = |rng: &mut rand_chacha::ChaCha8Rng, mean: f64| -> u64 {
        if mean <= 0.0 {
            0
        } else {
            rng.sample(Poisson::new(mean).expect("positive Poisson mean")) as u64
        }
    };
    let mut a = Vec::with_capacity(phases.len());
    let mut b = Vec::with_capacity(phases.len());
    for (i, &phi) in phases.iter().enumerate() {
        let (ma, mb) = fringe_means(v, phi0, c_a, c_b, phi);
        let mut rng = stream_rng(seed, i as u64);
        a.push(draw(&mut rng, ma));
        b.push(draw(&mut rng, mb));
    }
    FringeScan::new(phases.to_vec(), a, b)
}

/// Gaussian prior on `φ₀`, applied on the wrapped difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePrior {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub v: f64,
    pub phi0: f64,
    pub c_a: f64,
    pub c_b: f64,
    /// Covariance of `(V, φ₀, C_A, C_B)`.
    pub covariance: [[f64; 4]; 4],
    pub iterations: usize,
}

impl FringeFit {
    pub fn alpha(&self) -> f64 {
        wrap(self.phi0 + FRAC_PI_2)
    }

    pub fn sigma_v(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn sigma_phi0(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }
}

/// Wrap an angle to `(−π, π]`.
pub fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

const MAX_ITER: usize = 200;

/// Levenberg-damped Gauss-Newton on Poisson-weighted residuals, started from
/// a linear least-squares fit of the first Fourier component.
pub fn fit_fringe(scan: &FringeScan, prior: Option<PhasePrior>) -> Result<FringeFit> {
    if scan.counts_a.iter().chain(&scan.counts_b).all(|&c| c == 0) {
        return Err(Error::DegenerateScan("all counts are zero".into()));
    }
    if let Some(p) = prior {
        if !(p.sd > 0.0 && p.sd.is_finite()) {
            return Err(invalid("phase_prior", "sd must be positive"));
        }
    }
    let mut x = linear_start(scan)?;
    let mut weights = poisson_weights(scan, &x);
    let mut cost = objective(scan, &x, &weights, prior);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for it in 0..MAX_ITER {
        iterations = it + 1;
        let (jtj, jtr) = normal_equations(scan, &x, &weights, prior);
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for d in 0..4 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = x + step;
            if trial[2] <= 0.0 || trial[3] <= 0.0 {
                lambda *= 10.0;
                continue;
            }
            let c = objective(scan, &trial, &weights, prior);
            if c <= cost {
                let rel = (cost - c) / cost.max(1e-300);
                x = trial;
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-15 || step.norm() > 1e-13 * (1.0 + x.norm());
                break;
            }
            lambda *= 10.0;
        }
        // refresh the IRLS weights at the new means
        let w_new = poisson_weights(scan, &x);
        let reweighted = w_new.iter().zip(&weights).any(|(a, b)| (a.0 - b.0).abs() > 1e-10 * b.0 || (a.1 - b.1).abs() > 1e-10 * b.1);
        weights = w_new;
        cost = objective(scan, &x, &weights, prior);
        if !improved && !reweighted {
            break;
        }
        if it + 1 == MAX_ITER {
            return Err(Error::FitFailure(format!("no convergence after {MAX_ITER} iterations")));
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailure("non-finite parameters".into()));
    }
    if x[0] < 0.0 {
        x[0] = -x[0];
        x[1] += PI;
    }
    x[1] = wrap(x[1]);
    let (jtj, _) = normal_equations(scan, &x, &weights, prior);
    let cov = jtj.try_inverse().ok_or_else(|| Error::FitFailure("singular information matrix".into()))?;
    let mut covariance = [[0.0; 4]; 4];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = cov[(i, j)];
        }
    }
    Ok(FringeFit { v: x[0], phi0: x[1], c_a: x[2], c_b: x[3], covariance, iterations })
}

fn poisson_weights(scan: &FringeScan, x: &Vector4<f64>) -> Vec<(f64, f64)> {
    scan.phases
        .iter()
        .map(|&phi| {
            let (ma, mb) = fringe_means(x[0], x[1], x[2], x[3], phi);
            (1.0 / ma.max(1.0), 1.0 / mb.max(1.0))
        })
        .collect()
}

fn objective(scan: &FringeScan, x: &Vector4<f64>, w: &[(f64, f64)], prior: Option<PhasePrior>) -> f64 {
    let mut s = 0.0;
    for (i, &phi) in scan.phases.iter().enumerate() {
        let (ma, mb) = fringe_means(x[0], x[1], x[2], x[3], phi);
        s += w[i].0 * (scan.counts_a[i] as f64 - ma).powi(2) + w[i].1 * (scan.counts_b[i] as f64 - mb).powi(2);
    }
    if let Some(p) = prior {
        s += (wrap(x[1] - p.mean) / p.sd).powi(2);
    }
    s
}

fn normal_equations(scan: &FringeScan, x: &Vector4<f64>, w: &[(f64, f64)], prior: Option<PhasePrior>) -> (Matrix4<f64>, Vector4<f64>) {
    let (v, phi0, ca, cb) = (x[0], x[1], x[2], x[3]);
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for (i, &phi) in scan.phases.iter().enumerate() {
        let (s, c) = (phi + phi0).sin_cos();
        let ja = Vector4::new(ca * c, -ca * v * s, 1.0 + v * c, 0.0);
        let jb = Vector4::new(-cb * c, cb * v * s, 0.0, 1.0 - v * c);
        let ra = scan.counts_a[i] as f64 - ca * (1.0 + v * c);
        let rb = scan.counts_b[i] as f64 - cb * (1.0 - v * c);
        jtj += ja * ja.transpose() * w[i].0 + jb * jb.transpose() * w[i].1;
        jtr += ja * (ra * w[i].0) + jb * (rb * w[i].1);
    }
    if let Some(p) = prior {
        let inv = 1.0 / (p.sd * p.sd);
        jtj[(1, 1)] += inv;
        jtr[1] += -wrap(phi0 - p.mean) * inv;
    }
    (jtj, jtr)
}

/// Least squares of each port on `(1, cos φ, sin φ)`.
fn linear_start(scan: &FringeScan) -> Result<Vector4<f64>> {
    let fit_port = |counts: &[u64]| -> Result<[f64; 3]> {
        let mut ata = nalgebra::Matrix3::<f64>::zeros();
        let mut atb = nalgebra::Vector3::<f64>::zeros();
        for (&phi, &n) in scan.phases.iter().zip(counts) {
            let row = nalgebra::Vector3::new(1.0, phi.cos(), phi.sin());
            ata += row * row.transpose();
            atb += row * n as f64;
        }
        let sol = ata.lu().solve(&atb).ok_or_else(|| Error::DegenerateScan("phases do not span a fringe".into()))?;
        Ok([sol[0], sol[1], sol[2]])
    };
    let a = fit_port(&scan.counts_a)?;
    let b = fit_port(&scan.counts_b)?;
    let ca = a[0].max(1e-3);
    let cb = b[0].max(1e-3);
    // V cos(φ+φ₀) = V cos φ cos φ₀ − V sin φ sin φ₀
    let x = 0.5 * (a[1] / ca - b[1] / cb);
    let y = -0.5 * (a[2] / ca - b[2] / cb);
    let v = x.hypot(y).clamp(1e-6, 1.0);
    Ok(Vector4::new(v, y.atan2(x), ca, cb))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_recovery() {
        let phases: Vec<f64> = (0..6).map(|i| i as f64 * PI / 3.0).collect();
        let (v, phi0, ca, cb) = (0.5, 0.0, 1000.0, 800.0);
        let (a, b): (Vec<u64>, Vec<u64>) = phases
            .iter()
            .map(|&p| {
                let (ma, mb) = fringe_means(v, phi0, ca, cb, p);
                (ma.round() as u64, mb.round() as u64)
            })
            .unzip();
        let fit = fit_fringe(&FringeScan::new(phases, a, b).unwrap(), None).unwrap();
        assert!((fit.v - v).abs() < 1e-8);
        assert!(wrap(fit.phi0 - phi0).abs() < 1e-8);
        assert!((fit.c_a - ca).abs() < 1e-6 && (fit.c_b - cb).abs() < 1e-6);
    }

    #[test]
    fn extremal_fringe_means() {
        let (ma, mb) = fringe_means(1.0, 0.3, 50.0, 70.0, -0.3);
        assert_eq!((ma, mb), (100.0, 0.0));
    }

    #[test]
    fn rejects_bad_scans() {
        assert!(FringeScan::new(vec![0.0, 1.0, 2.0], vec![1; 3], vec![1; 3]).is_err());
        let s = FringeScan::new(vec![0.0, 1.0, 2.0, 3.0], vec![0; 4], vec![0; 4]).unwrap();
        assert!(matches!(fit_fringe(&s, None), Err(Error::DegenerateScan(_))));
    }

    #[test]
    fn simulated_round_trip() {
        let phases: Vec<f64> = (0..16).map(|i| i as f64 * 2.0 * PI / 16.0).collect();
        let scan = simulate_fringe(0.7, 1.2, 500.0, 400.0, &phases, 4).unwrap();
        let fit = fit_fringe(&scan, None).unwrap();
        assert!((fit.v - 0.7).abs() < 4.0 * fit.sigma_v());
        assert!(wrap(fit.alpha() - 1.2).abs() < 4.0 * fit.sigma_phi0());
    }
}
