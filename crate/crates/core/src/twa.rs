//! Truncated Wigner trajectories.
//!
//! Initial points are drawn from the Gaussian Wigner function and each one is
//! carried along the classical characteristics. Every trajectory owns a ChaCha
//! stream indexed by its position, and every reduction goes through
//! [`numeric::chunked_sum`](crate::numeric::chunked_sum), so results are
//! bit-identical for any rayon pool size.

use crate::error::{invalid, require_positive, Error, Result};
use crate::numeric::{chunked_sum, mean_phasor, stream_rng, TruncatedNormal, CHUNK};
use crate::phase_space::{quench_matrix, GaussianState, LambDicke, Mat2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

/// Default RK4 resolution for the quartic flow.
pub const STEPS_PER_PERIOD: usize = 200;
/// Largest visibility change tolerated when the step count is doubled.
pub const STEP_DOUBLING_TOL: f64 = 1e-5;

/// Classical dynamics used to advance trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ClassicalFlow {
    /// Weyl symbol of `ωn + Kn²`, `(ω − K)I + KI²` with `I = (q² + p²)/4`.
    /// Trajectories rotate rigidly at `Ω(I) = ω − K + 2K·I`, integrated in
    /// closed form.
    KerrNumber,
    /// `dq/dt = ωp`, `dp/dt = −ωq − (4K/3)q³`, the characteristics of
    /// `(ω/4)(p² + q²) + (K/6)q⁴`, integrated by fixed-step RK4.
    Quartic { steps_per_period: usize },
}

impl Default for ClassicalFlow {
    fn default() -> Self {
        ClassicalFlow::KerrNumber
    }
}

impl ClassicalFlow {
    pub fn quartic() -> Self {
        ClassicalFlow::Quartic { steps_per_period: STEPS_PER_PERIOD }
    }
}

/// Visibility estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleVisibility {
    pub v: f64,
    pub alpha: f64,
    pub stderr: f64,
}

/// Phase-space samples `(q_j, p_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    q: Vec<f64>,
    p: Vec<f64>,
    seed: u64,
    nbar_draws: Option<Vec<f64>>,
}

impl TrajectoryEnsemble {
    pub fn from_points(q: Vec<f64>, p: Vec<f64>, seed: u64) -> Result<Self> {
        if q.is_empty() || q.len() != p.len() {
            return Err(invalid("q", "need equally many q and p values, at least one"));
        }
        Ok(TrajectoryEnsemble { q, p, seed, nbar_draws: None })
    }

    /// Draw from the Wigner function of `state`.
    pub fn sample(state: &GaussianState, n_traj: usize, seed: u64) -> Result<Self> {
        Self::sample_with(state, n_traj, seed, None)
    }

    /// Thermal marginalization: trajectory `j` first draws `n̄_j` from `nbar`,
    /// then samples `state` with its covariance scaled by `2n̄_j + 1`.
    /// `state` is the zero-temperature reference.
    pub fn sample_marginalized(state: &GaussianState, nbar: TruncatedNormal, n_traj: usize, seed: u64) -> Result<Self> {
        Self::sample_with(state, n_traj, seed, Some(nbar))
    }

    fn sample_with(state: &GaussianState, n_traj: usize, seed: u64, nbar: Option<TruncatedNormal>) -> Result<Self> {
        if n_traj == 0 {
            return Err(invalid("n_traj", "must be at least 1"));
        }
        let l = cholesky(&state.covariance());
        let d = state.mean();
        let draws: Vec<(f64, f64, f64)> = (0..n_traj)
            .into_par_iter()
            .with_min_len(CHUNK)
            .map(|j| {
                let mut rng = stream_rng(seed, j as u64);
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let nb = match nbar {
                    Some(dist) => dist.quantile(rng.random::<f64>()),
                    None => 0.0,
                };
                let s = (2.0 * nb + 1.0).sqrt();
                let q = d[0] + s * l[0][0] * z1;
                let p = d[1] + s * (l[1][0] * z1 + l[1][1] * z2);
                (q, p, nb)
            })
            .collect();
        let q = draws.iter().map(|x| x.0).collect();
        let p = draws.iter().map(|x| x.1).collect();
        let nbar_draws = nbar.map(|_| draws.iter().map(|x| x.2).collect());
        Ok(TrajectoryEnsemble { q, p, seed, nbar_draws })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn nbar_draws(&self) -> Option<&[f64]> {
        self.nbar_draws.as_deref()
    }

    /// Apply the same linear map to every trajectory.
    pub fn transform(&self, m: &Mat2) -> Self {
        let mut out = self.clone();
        out.map_points(|q, p| (m[0][0] * q + m[0][1] * p, m[1][0] * q + m[1][1] * p));
        out
    }

    pub fn quench_rescale(&self, omega_from: f64, omega_to: f64) -> Result<Self> {
        Ok(self.transform(&quench_matrix(omega_from, omega_to)?))
    }

    fn map_points<F>(&mut self, f: F)
    where
        F: Fn(f64, f64) -> (f64, f64) + Sync,
    {
        self.q
            .par_chunks_mut(CHUNK)
            .zip(self.p.par_chunks_mut(CHUNK))
            .for_each(|(qs, ps)| {
                for (q, p) in qs.iter_mut().zip(ps.iter_mut()) {
                    let (a, b) = f(*q, *p);
                    *q = a;
                    *p = b;
                }
            });
    }

    /// Advance every trajectory for `duration` seconds in a trap of angular
    /// frequency `omega` with Kerr coefficient `kerr` (rad/s).
    pub fn evolve(&self, omega: f64, kerr: f64, duration: f64, flow: ClassicalFlow) -> Result<Self> {
        require_positive("omega", omega)?;
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(invalid("duration", format!("must be finite and >= 0, got {duration}")));
        }
        if !kerr.is_finite() {
            return Err(invalid("kerr", "non-finite"));
        }
        let mut out = self.clone();
        if duration == 0.0 {
            return Ok(out);
        }
        match flow {
            ClassicalFlow::KerrNumber => {
                out.map_points(|q, p| {
                    let action = 0.25 * (q * q + p * p);
                    let (s, c) = ((omega - kerr + 2.0 * kerr * action) * duration).sin_cos();
                    (q * c + p * s, p * c - q * s)
                });
            }
            ClassicalFlow::Quartic { .. } if kerr == 0.0 => {
                let (s, c) = (omega * duration).sin_cos();
                out.map_points(|q, p| (q * c + p * s, p * c - q * s));
            }
            ClassicalFlow::Quartic { steps_per_period } => {
                self.check_bound(omega, kerr)?;
                let n = quartic_steps(omega, duration, steps_per_period)?;
                let dt = duration / n as f64;
                out.map_points(|q, p| rk4_quartic(q, p, omega, kerr, dt, n));
            }
        }
        Ok(out)
    }

    /// [`evolve`](Self::evolve) plus, for the RK4 flow, a step-doubling check of
    /// the segment-end visibility at `eta`.
    pub fn evolve_validated(&self, omega: f64, kerr: f64, duration: f64, flow: ClassicalFlow, eta: LambDicke) -> Result<Self> {
        let coarse = self.evolve(omega, kerr, duration, flow)?;
        if let ClassicalFlow::Quartic { steps_per_period } = flow {
            if kerr != 0.0 && duration > 0.0 {
                let fine = self.evolve(omega, kerr, duration, ClassicalFlow::Quartic { steps_per_period: 2 * steps_per_period })?;
                let change = (coarse.visibility(eta).v - fine.visibility(eta).v).abs();
                if change > STEP_DOUBLING_TOL {
                    return Err(Error::Convergence { change, tolerance: STEP_DOUBLING_TOL });
                }
            }
        }
        Ok(coarse)
    }

    /// For `K < 0` the quartic potential turns over at `q² = 3ω/(4|K|)`;
    /// trajectories at or above the barrier energy run away.
    fn check_bound(&self, omega: f64, kerr: f64) -> Result<()> {
        if kerr >= 0.0 {
            return Ok(());
        }
        let q_barrier_sq = 3.0 * omega / (4.0 * kerr.abs());
        let e_barrier = 3.0 * omega * omega / (32.0 * kerr.abs());
        let escaped = chunked_sum(self.len(), |j| {
            let (q, p) = (self.q[j], self.p[j]);
            let unbound = q * q >= q_barrier_sq || quartic_energy(q, p, omega, kerr) >= e_barrier;
            unbound as usize
        });
        if escaped > 0 {
            return Err(Error::TrajectoryEscape { escaped, total: self.len() });
        }
        Ok(())
    }

    /// Mean of `exp(2iη q_j)`, with the CLT error of its modulus.
    pub fn visibility(&self, eta: LambDicke) -> EnsembleVisibility {
        let k = 2.0 * eta.value();
        let chi = mean_phasor(self.len(), |j| k * self.q[j]);
        let v = chi.norm();
        let alpha = chi.arg();
        let n = self.len();
        let stderr = if n < 2 {
            0.0
        } else {
            let ss = chunked_sum(n, |j| {
                let proj = (k * self.q[j] - alpha).cos() - v;
                proj * proj
            });
            (ss / ((n - 1) as f64 * n as f64)).sqrt()
        };
        EnsembleVisibility { v, alpha, stderr }
    }

    /// Sample mean and covariance (moment summary only).
    pub fn covariance(&self) -> Result<GaussianState> {
        let n = self.len();
        if n < 2 {
            return Err(invalid("ensemble", "covariance needs at least two trajectories"));
        }
        let nf = n as f64;
        let mq = chunked_sum(n, |j| self.q[j]) / nf;
        let mp = chunked_sum(n, |j| self.p[j]) / nf;
        let qq = chunked_sum(n, |j| (self.q[j] - mq).powi(2)) / (nf - 1.0);
        let pp = chunked_sum(n, |j| (self.p[j] - mp).powi(2)) / (nf - 1.0);
        let qp = chunked_sum(n, |j| (self.q[j] - mq) * (self.p[j] - mp)) / (nf - 1.0);
        GaussianState::from_moments([mq, mp], [[qq, qp], [qp, pp]])
    }

    pub fn energies(&self, omega: f64, kerr: f64) -> Vec<f64> {
        self.q.iter().zip(&self.p).map(|(&q, &p)| quartic_energy(q, p, omega, kerr)).collect()
    }

    /// Write `<stem>.bin` (all `q` then all `p`, little-endian f64) and a JSON
    /// sidecar `<stem>.json`. Returns both paths.
    pub fn write_columnar(&self, stem: &Path, provenance: &str) -> Result<(PathBuf, PathBuf)> {
        let bin = stem.with_extension("bin");
        let json = stem.with_extension("json");
        let mut bytes = Vec::with_capacity(16 * self.len());
        for x in self.q.iter().chain(&self.p) {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        fs::write(&bin, bytes)?;
        let meta = SnapshotMeta {
            n_trajectories: self.len(),
            seed: self.seed,
            columns: vec!["q".into(), "p".into()],
            dtype: "f64-le".into(),
            layout: "columnar".into(),
            provenance: provenance.into(),
        };
        fs::write(&json, serde_json::to_string_pretty(&meta)?)?;
        Ok((bin, json))
    }

    pub fn read_columnar(stem: &Path) -> Result<Self> {
        let meta: SnapshotMeta = serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
        let bytes = fs::read(stem.with_extension("bin"))?;
        if bytes.len() != 16 * meta.n_trajectories {
            return Err(invalid("snapshot", format!("expected {} bytes, found {}", 16 * meta.n_trajectories, bytes.len())));
        }
        let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        let (q, p) = vals.split_at(meta.n_trajectories);
        Self::from_points(q.to_vec(), p.to_vec(), meta.seed)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotMeta {
    n_trajectories: usize,
    seed: u64,
    columns: Vec<String>,
    dtype: String,
    layout: String,
    provenance: String,
}

pub fn sample_initial(state: &GaussianState, n_traj: usize, seed: u64) -> Result<TrajectoryEnsemble> {
    TrajectoryEnsemble::sample(state, n_traj, seed)
}

/// Quartic characteristics with an explicit step `dt`; `None` uses
/// [`STEPS_PER_PERIOD`].
pub fn evolve_segment(ens: &TrajectoryEnsemble, omega: f64, kerr: f64, duration: f64, dt: Option<f64>) -> Result<TrajectoryEnsemble> {
    let steps_per_period = match dt {
        None => STEPS_PER_PERIOD,
        Some(h) => {
            require_positive("dt", h)?;
            ((2.0 * PI / omega) / h).ceil().max(1.0) as usize
        }
    };
    ens.evolve(omega, kerr, duration, ClassicalFlow::Quartic { steps_per_period })
}

pub fn ensemble_visibility(ens: &TrajectoryEnsemble, eta: LambDicke) -> EnsembleVisibility {
    ens.visibility(eta)
}

pub fn ensemble_covariance(ens: &TrajectoryEnsemble) -> Result<GaussianState> {
    ens.covariance()
}

pub fn quartic_energy(q: f64, p: f64, omega: f64, kerr: f64) -> f64 {
    0.25 * omega * (p * p + q * q) + kerr / 6.0 * q.powi(4)
}

fn quartic_steps(omega: f64, duration: f64, steps_per_period: usize) -> Result<usize> {
    if steps_per_period == 0 {
        return Err(invalid("steps_per_period", "must be positive"));
    }
    let h = 2.0 * PI / omega / steps_per_period as f64;
    Ok(((duration / h).ceil() as usize).max(1))
}

fn rk4_quartic(mut q: f64, mut p: f64, omega: f64, kerr: f64, dt: f64, steps: usize) -> (f64, f64) {
    let c = 4.0 * kerr / 3.0;
    let f = |q: f64, p: f64| (omega * p, -omega * q - c * q * q * q);
    for _ in 0..steps {
        let (k1q, k1p) = f(q, p);
        let (k2q, k2p) = f(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p);
        let (k3q, k3p) = f(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p);
        let (k4q, k4p) = f(q + dt * k3q, p + dt * k3p);
        q += dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        p += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    }
    (q, p)
}

fn cholesky(s: &Mat2) -> Mat2 {
    let l00 = s[0][0].sqrt();
    let l10 = s[1][0] / l00;
    let l11 = (s[1][1] - l10 * l10).max(0.0).sqrt();
    [[l00, 0.0], [l10, l11]]
}
