//! Interferometric Wigner tomography: sample the characteristic function on an
//! annulus of k-space, then invert by interpolation and a 2D FFT.
//!
//! With `χ(k) = ∫ W(x) e^{ik·x} d²x` the inverse is
//! `W(x) = (2π)⁻² ∫ χ(k) e^{−ik·x} d²k`.

use crate::error::{invalid, Error, Result};
use crate::fock::ChiEvaluator;
use crate::fock::{FockDensityMatrix, WignerGrid};
use crate::inference::fringe::{fit_fringe, simulate_fringe, FringeScan};
use crate::numeric::{derive_seed, linspace};
use crate::phase_space::{mat_mul, mat_vec, rotation_matrix, LambDicke, Mat2};
use crate::units::s_to_us;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};

/// Interferometer phases per fringe scan.
pub const FRINGE_PHASES: usize = 8;
/// Largest angular gap allowed within a shell.
pub const MAX_ANGULAR_GAP: f64 = PI / 16.0;
pub const MIN_SHELLS: usize = 8;
/// Radii closer than this (relative) belong to one shell.
const SHELL_TOL: f64 = 1e-6;
/// Pre-symmetrization `|χ(k) − χ*(−k)|` allowed, in units of the largest
/// sample uncertainty.
const HERMITIAN_SIGMAS: f64 = 8.0;

/// One characteristic-function measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSample {
    pub k: [f64; 2],
    pub chi: Complex64,
    pub sigma_chi: f64,
    /// `(t₁, t₂, r)` with times in seconds.
    pub provenance: (f64, f64, f64),
    /// False when the fringe phase could not be fitted; `chi` then carries
    /// only the magnitude.
    pub phase_resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyPlan {
    pub eta: LambDicke,
    pub r: f64,
    pub t1_list: Vec<f64>,
    pub t2_list: Vec<f64>,
    pub omega: f64,
    pub shots_per_point: u64,
}

impl TomographyPlan {
    /// `n_shells` radii log-spaced over the full annulus, each visited at
    /// `n_angles` evenly spaced orientations over one trap period.
    pub fn annulus(eta: LambDicke, r: f64, omega: f64, n_shells: usize, n_angles: usize, shots_per_point: u64) -> Result<Self> {
        if !(r >= 0.0) || !(omega > 0.0) || n_shells < 2 || n_angles == 0 {
            return Err(invalid("plan", "need r ≥ 0, ω > 0, at least two shells and one angle"));
        }
        let (lo, hi) = annulus_bounds(eta, r);
        let t2_list = linspace(lo.ln(), hi.ln(), n_shells)
            .into_iter()
            .map(|ln_rho| {
                // |k|² = (2η)²(e^{2r}cos²θ + e^{−2r}sin²θ), θ = ωt₂ in [0, π/2]
                let x = (ln_rho.exp() / (2.0 * eta.value())).powi(2);
                let c2 = if r == 0.0 { 1.0 } else { ((x - (-2.0 * r).exp()) / (2.0 * (2.0 * r).sinh())).clamp(0.0, 1.0) };
                c2.sqrt().acos() / omega
            })
            .collect();
        let period = 2.0 * PI / omega;
        let t1_list = (0..n_angles).map(|i| period * i as f64 / n_angles as f64).collect();
        Ok(TomographyPlan { eta, r, t1_list, t2_list, omega, shots_per_point })
    }

    pub fn annulus_bounds(&self) -> (f64, f64) {
        annulus_bounds(self.eta, self.r)
    }
}

/// `[2η·e^{−r}, 2η·e^{r}]`.
pub fn annulus_bounds(eta: LambDicke, r: f64) -> (f64, f64) {
    let k0 = 2.0 * eta.value();
    (k0 * (-r).exp(), k0 * r.exp())
}

/// `k = R(ωt₁)·Sq(r)·R(ωt₂)·(2η, 0)` with `Sq(r) = diag(e^r, e^−r)`.
pub fn k_vector(eta: LambDicke, r: f64, omega: f64, t1: f64, t2: f64) -> [f64; 2] {
    let sq: Mat2 = [[r.exp(), 0.0], [0.0, (-r).exp()]];
    let m = mat_mul(&rotation_matrix(omega * t1), &mat_mul(&sq, &rotation_matrix(omega * t2)));
    mat_vec(&m, &[2.0 * eta.value(), 0.0])
}

/// Measurement stubs (`chi` unset) in `t₁`-major order.
pub fn k_grid(plan: &TomographyPlan) -> Vec<KSample> {
    let mut out = Vec::with_capacity(plan.t1_list.len() * plan.t2_list.len());
    for &t1 in &plan.t1_list {
        for &t2 in &plan.t2_list {
            out.push(KSample {
                k: k_vector(plan.eta, plan.r, plan.omega, t1, t2),
                chi: Complex64::new(0.0, 0.0),
                sigma_chi: 0.0,
                provenance: (t1, t2, plan.r),
                phase_resolved: true,
            });
        }
    }
    out
}

fn fringe_phases() -> Vec<f64> {
    (0..FRINGE_PHASES).map(|i| 2.0 * PI * i as f64 / FRINGE_PHASES as f64).collect()
}

/// Magnitude from the first Fourier component of the asymmetry, for scans
/// whose full fit fails.
fn fourier_magnitude(scan: &FringeScan) -> f64 {
    let mut z = Complex64::new(0.0, 0.0);
    for ((phi, a), b) in scan.phases.iter().zip(&scan.counts_a).zip(&scan.counts_b) {
        let tot = (a + b) as f64;
        if tot > 0.0 {
            z += Complex64::from_polar((*a as f64 - *b as f64) / tot, *phi);
        }
    }
    (2.0 * z.norm() / scan.len() as f64).min(1.0)
}

fn measure_true(chi_true: Complex64, k: [f64; 2], shots: u64, seed: u64) -> Result<KSample> {
    if shots == 0 {
        return Err(invalid("shots", "must be at least 1"));
    }
    let stub = KSample { k, chi: Complex64::new(1.0, 0.0), sigma_chi: 0.0, provenance: (0.0, 0.0, 0.0), phase_resolved: true };
    if k == [0.0, 0.0] {
        return Ok(stub);
    }
    // half the shots per phase land in each port on average
    let c = shots as f64 / (2.0 * FRINGE_PHASES as f64);
    let v_true = chi_true.norm().min(1.0);
    let scan = simulate_fringe(v_true, chi_true.arg(), c, c, &fringe_phases(), seed)?;
    match fit_fringe(&scan, None) {
        Ok(fit) if fit.sigma_v().is_finite() && fit.sigma_phi0().is_finite() => {
            let sigma = fit.sigma_v().hypot(fit.v * fit.sigma_phi0()) / 2f64.sqrt();
            Ok(KSample { chi: Complex64::from_polar(fit.v, fit.alpha()), sigma_chi: sigma, ..stub })
        }
        _ => {
            let v = fourier_magnitude(&scan);
            Ok(KSample { chi: Complex64::new(v, 0.0), sigma_chi: (2.0 / shots as f64).sqrt(), phase_resolved: false, ..stub })
        }
    }
}

/// Simulated fringe measurement of `χ(k)` with Poisson noise over `shots`
/// detection events.
pub fn measure_chi(target: &FockDensityMatrix, k: [f64; 2], shots: u64, seed: u64) -> Result<KSample> {
    measure_true(target.characteristic(k[0], k[1]), k, shots, seed)
}

/// Measure every point of the plan; point `i` uses a seed derived from its index.
pub fn measure_plan(target: &FockDensityMatrix, plan: &TomographyPlan, seed: u64) -> Result<Vec<KSample>> {
    let chi = ChiEvaluator::new(target);
    k_grid(plan)
        .into_par_iter()
        .enumerate()
        .map(|(i, stub)| {
            let s = measure_true(chi.eval(stub.k[0], stub.k[1]), stub.k, plan.shots_per_point, derive_seed(seed, &format!("k{i}")))?;
            Ok(KSample { provenance: stub.provenance, ..s })
        })
        .collect()
}

/// Noiseless samples at the plan's k-points.
pub fn exact_samples(target: &FockDensityMatrix, plan: &TomographyPlan) -> Vec<KSample> {
    let chi = ChiEvaluator::new(target);
    k_grid(plan).into_par_iter().map(|s| KSample { chi: chi.eval(s.k[0], s.k[1]), ..s }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Taper {
    /// Hard cut at the outer radius.
    None,
    /// Cosine-squared roll-off over this fraction of the outer radius.
    Cosine(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    /// Phase-space grid covers `[−x_max, x_max)` on both axes.
    pub x_max: f64,
    pub taper: Taper,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n: 128, x_max: 6.0, taper: Taper::None }
    }
}

impl GridSpec {
    pub fn dx(&self) -> f64 {
        2.0 * self.x_max / self.n as f64
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dx())
    }

    pub fn x_axis(&self) -> Vec<f64> {
        (0..self.n).map(|j| -self.x_max + j as f64 * self.dx()).collect()
    }

    pub fn k_axis(&self) -> Vec<f64> {
        let half = (self.n / 2) as f64;
        (0..self.n).map(|m| (m as f64 - half) * self.dk()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub grid: WignerGrid,
    /// Largest `|χ(k) − χ*(−k)|` on the interpolated grid before symmetrization.
    pub hermitian_deviation: f64,
    /// Largest `|Im W|` after the inverse transform, relative to `max|W|`.
    pub imaginary_residue: f64,
}

struct Shell {
    radius: f64,
    angles: Vec<f64>,
    values: Vec<Complex64>,
}

impl Shell {
    fn max_gap(&self) -> f64 {
        let n = self.angles.len();
        let mut gap = self.angles[0] + 2.0 * PI - self.angles[n - 1];
        for w in self.angles.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        gap
    }

    /// Periodic linear interpolation in angle.
    fn at(&self, phi: f64) -> Complex64 {
        let n = self.angles.len();
        let phi = phi.rem_euclid(2.0 * PI);
        let i = self.angles.partition_point(|&a| a <= phi);
        let (a0, v0, a1, v1) = if i == 0 {
            (self.angles[n - 1] - 2.0 * PI, self.values[n - 1], self.angles[0], self.values[0])
        } else if i == n {
            (self.angles[n - 1], self.values[n - 1], self.angles[0] + 2.0 * PI, self.values[0])
        } else {
            (self.angles[i - 1], self.values[i - 1], self.angles[i], self.values[i])
        };
        let w = if a1 > a0 { (phi - a0) / (a1 - a0) } else { 0.0 };
        v0 * (1.0 - w) + v1 * w
    }
}

fn build_shells(samples: &[KSample]) -> Result<Vec<Shell>> {
    let mut pts: Vec<(f64, f64, Complex64)> = samples
        .iter()
        .filter(|s| s.k != [0.0, 0.0])
        .map(|s| (s.k[0].hypot(s.k[1]), s.k[1].atan2(s.k[0]).rem_euclid(2.0 * PI), s.chi))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut shells: Vec<Shell> = Vec::new();
    let mut group: Vec<(f64, f64, Complex64)> = Vec::new();
    let flush = |group: &mut Vec<(f64, f64, Complex64)>, shells: &mut Vec<Shell>| {
        if group.is_empty() {
            return;
        }
        group.sort_by(|a, b| a.1.total_cmp(&b.1));
        let radius = group.iter().map(|g| g.0).sum::<f64>() / group.len() as f64;
        shells.push(Shell { radius, angles: group.iter().map(|g| g.1).collect(), values: group.iter().map(|g| g.2).collect() });
        group.clear();
    };
    for p in pts {
        if let Some(first) = group.first() {
            if (p.0 - first.0).abs() > SHELL_TOL * first.0 {
                flush(&mut group, &mut shells);
            }
        }
        group.push(p);
    }
    flush(&mut group, &mut shells);
    if shells.len() < MIN_SHELLS {
        return Err(Error::Coverage(format!("{} radial shells, need at least {MIN_SHELLS}", shells.len())));
    }
    for s in &shells {
        let gap = s.max_gap();
        if gap > MAX_ANGULAR_GAP + 1e-9 {
            return Err(Error::Coverage(format!("angular gap {gap:.4} rad at |k| = {:.4}", s.radius)));
        }
    }
    Ok(shells)
}

fn interpolate(shells: &[Shell], kx: f64, ky: f64) -> Option<Complex64> {
    let rho = kx.hypot(ky);
    let (lo, hi) = (shells[0].radius, shells[shells.len() - 1].radius);
    if rho < lo || rho > hi {
        return None;
    }
    let phi = ky.atan2(kx);
    let i = shells.partition_point(|s| s.radius <= rho).clamp(1, shells.len() - 1);
    let (a, b) = (&shells[i - 1], &shells[i]);
    let w = (rho.ln() - a.radius.ln()) / (b.radius.ln() - a.radius.ln());
    Some(a.at(phi) * (1.0 - w) + b.at(phi) * w)
}

fn fft_2d(data: &mut [Complex64], n: usize) {
    let fft = FftPlanner::new().plan_fft_forward(n);
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = data[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
}

/// Polar interpolation onto a Cartesian k-grid (zero outside the sampled
/// annulus, `χ(0) = 1`), Hermitian symmetrization and inverse transform.
pub fn reconstruct_wigner(samples: &[KSample], spec: &GridSpec) -> Result<Reconstruction> {
    let n = spec.n;
    if n < 4 || n % 2 != 0 || !(spec.x_max > 0.0) {
        return Err(invalid("grid", "need an even size ≥ 4 and x_max > 0"));
    }
    let shells = build_shells(samples)?;
    let k_outer = shells[shells.len() - 1].radius;
    let k = spec.k_axis();
    let half = n / 2;
    let mut chi = vec![Complex64::new(0.0, 0.0); n * n];
    chi.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, c) in row.iter_mut().enumerate() {
            if i == half && j == half {
                *c = Complex64::new(1.0, 0.0);
            } else if let Some(v) = interpolate(&shells, k[i], k[j]) {
                let w = match spec.taper {
                    Taper::None => 1.0,
                    Taper::Cosine(f) => {
                        let edge = k_outer * (1.0 - f);
                        let rho = k[i].hypot(k[j]);
                        if rho <= edge || f <= 0.0 {
                            1.0
                        } else {
                            (0.5 * PI * (rho - edge) / (k_outer - edge)).cos().powi(2)
                        }
                    }
                };
                *c = v * w;
            }
        }
    });
    // index m ↔ n − m is k ↔ −k; m = 0 has no partner
    let mirror = |m: usize| if m == 0 { None } else { Some(n - m) };
    let mut deviation: f64 = 0.0;
    let mut sym = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            if let (Some(mi), Some(mj)) = (mirror(i), mirror(j)) {
                let a = chi[i * n + j];
                let b = chi[mi * n + mj].conj();
                deviation = deviation.max((a - b).norm());
                sym[i * n + j] = 0.5 * (a + b);
            }
        }
    }
    let sigma_max = samples.iter().map(|s| s.sigma_chi).fold(0.0, f64::max);
    let tolerance = HERMITIAN_SIGMAS * sigma_max * 2f64.sqrt() + 1e-6;
    if deviation > tolerance {
        return Err(Error::NonHermitian { deviation });
    }
    // per axis e^{−ik_m x_j} = (−1)^{n/2} (−1)^m (−1)^j e^{−2πi mj/n}; the
    // (−1)^{n/2} factors cancel between the two axes
    for i in 0..n {
        for j in 0..n {
            if (i + j) % 2 == 1 {
                sym[i * n + j] = -sym[i * n + j];
            }
        }
    }
    fft_2d(&mut sym, n);
    let scale = spec.dk() * spec.dk() / (4.0 * PI * PI);
    let mut values = vec![vec![0.0; n]; n];
    let mut im_max: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s = if (i + j) % 2 == 1 { -scale } else { scale };
            let w = sym[i * n + j] * s;
            values[i][j] = w.re;
            im_max = im_max.max(w.im.abs());
        }
    }
    let w_max = values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let axis = spec.x_axis();
    Ok(Reconstruction {
        grid: WignerGrid::new(axis.clone(), axis, values)?,
        hermitian_deviation: deviation,
        imaginary_residue: if w_max > 0.0 { im_max / w_max } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    /// `‖W_rec − W_true‖₂ / ‖W_true‖₂`.
    pub l2_error: f64,
    /// `∫W_rec·W_true / (‖W_rec‖₂‖W_true‖₂)`.
    pub overlap: f64,
    /// `(min W_rec, min W_true)`.
    pub min_values: (f64, f64),
}

pub fn reconstruction_fidelity(w_rec: &WignerGrid, w_true: &WignerGrid) -> Result<Fidelity> {
    if !w_rec.same_axes(w_true) {
        return Err(Error::GridMismatch("reconstruction and reference use different axes".into()));
    }
    let (mut diff, mut rr, mut tt, mut rt) = (0.0, 0.0, 0.0, 0.0);
    for (a, b) in w_rec.values.iter().flatten().zip(w_true.values.iter().flatten()) {
        diff += (a - b) * (a - b);
        rr += a * a;
        tt += b * b;
        rt += a * b;
    }
    if tt == 0.0 || rr == 0.0 {
        return Err(invalid("grid", "all-zero Wigner grid"));
    }
    Ok(Fidelity { l2_error: (diff / tt).sqrt(), overlap: rt / (rr * tt).sqrt(), min_values: (w_rec.min(), w_true.min()) })
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    kx: f64,
    ky: f64,
    re_chi: f64,
    im_chi: f64,
    sigma: f64,
    t1_us: f64,
    t2_us: f64,
}

/// CSV `kx,ky,re_chi,im_chi,sigma,t1_us,t2_us`.
pub fn write_samples<W: Write>(samples: &[KSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(Row {
            kx: s.k[0],
            ky: s.k[1],
            re_chi: s.chi.re,
            im_chi: s.chi.im,
            sigma: s.sigma_chi,
            t1_us: s_to_us(s.provenance.0),
            t2_us: s_to_us(s.provenance.1),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_samples`]; `r` is not stored and comes from the caller.
pub fn read_samples<R: Read>(input: R, r: f64) -> Result<Vec<KSample>> {
    let mut rd = csv::Reader::from_reader(input);
    rd.deserialize::<Row>()
        .map(|row| {
            let row = row?;
            Ok(KSample {
                k: [row.kx, row.ky],
                chi: Complex64::new(row.re_chi, row.im_chi),
                sigma_chi: row.sigma,
                provenance: (row.t1_us * 1e-6, row.t2_us * 1e-6, r),
                phase_resolved: true,
            })
        })
        .collect()
}
