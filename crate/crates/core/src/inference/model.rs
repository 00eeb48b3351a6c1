//! Forward models for QEQ visibility scans, the likelihood and the priors.

use super::dataset::{ScanKind, VisibilityDatum};
use crate::error::{invalid, Error, Result};
use crate::fock::FockDensityMatrix;
use crate::numeric::{mean_phasor, stream_rng, TruncatedNormal};
use crate::phase_space::{GaussianState, LambDicke};
use crate::protocol::{qeq_sequence, run_to_end, DurationOffsets, KerrScaling, MotionalState, ProtocolSequence};
use crate::units::{angular_to_khz, khz_to_angular, s_to_us, us_to_s};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Model parameters. `ω₂ = ω₁·e^{−2S₁}` is derived, not free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub s1: f64,
    pub kerr_ratio: f64,
    /// `t_off,ΔT`: added to the shallow-trap duration, seconds.
    #[serde(rename = "t_off_dT")]
    pub t_off_shallow: f64,
    /// `t_off,Δt`: added to the deep-trap duration, seconds.
    #[serde(rename = "t_off_dt")]
    pub t_off_deep: f64,
    /// Deep-trap angular frequency, rad/s.
    pub omega1: f64,
}

impl FitParams {
    /// Names of the sampling coordinates, in [`to_vector`](Self::to_vector) order.
    pub const NAMES: [&'static str; 5] = ["S1", "K_ratio", "t_off_dT_us", "t_off_dt_us", "f1_kHz"];
    pub const DIM: usize = 5;

    pub fn omega2(&self) -> f64 {
        self.omega1 * (-2.0 * self.s1).exp()
    }

    pub fn is_valid(&self) -> bool {
        self.s1 > 0.0 && self.kerr_ratio <= 0.0 && self.omega1 > 0.0 && [self.s1, self.kerr_ratio, self.t_off_shallow, self.t_off_deep, self.omega1].iter().all(|x| x.is_finite())
    }

    /// Sampling coordinates: offsets in μs, frequency as `ω₁/2π` in kHz.
    pub fn to_vector(&self) -> [f64; 5] {
        [self.s1, self.kerr_ratio, s_to_us(self.t_off_shallow), s_to_us(self.t_off_deep), angular_to_khz(self.omega1)]
    }

    pub fn from_vector(x: &[f64]) -> Self {
        FitParams { s1: x[0], kerr_ratio: x[1], t_off_shallow: us_to_s(x[2]), t_off_deep: us_to_s(x[3]), omega1: khz_to_angular(x[4]) }
    }
}

/// Nominal durations held fixed while the other one is scanned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanDesign {
    /// Nominal `ΔT` during deep scans, seconds.
    pub fixed_shallow: f64,
    /// Nominal `Δt` during shallow scans, seconds.
    pub fixed_deep: f64,
}

impl ScanDesign {
    /// Nominal `(ΔT, Δt)` for a datum.
    pub fn durations(&self, scan: ScanKind, t: f64) -> (f64, f64) {
        match scan {
            ScanKind::ShallowScan => (t, self.fixed_deep),
            ScanKind::DeepScan => (self.fixed_shallow, t),
        }
    }
}

/// Kerr coefficients `(K_shallow, K_deep)` in rad/s.
pub fn segment_kerr(params: &FitParams, scaling: KerrScaling) -> (f64, f64) {
    let k1 = params.kerr_ratio * params.omega1;
    match scaling {
        KerrScaling::FixedCoefficient => (k1, k1),
        KerrScaling::FrequencyRatio => (params.kerr_ratio * params.omega2(), k1),
    }
}

/// QEQ sequence for one scan point.
pub fn scan_sequence(params: &FitParams, design: &ScanDesign, scaling: KerrScaling, scan: ScanKind, t: f64) -> Result<ProtocolSequence> {
    let (dt_shallow, dt_deep) = design.durations(scan, t);
    let offsets = DurationOffsets { shallow: params.t_off_shallow, deep: params.t_off_deep };
    Ok(qeq_sequence(params.omega1, params.omega2(), dt_shallow, dt_deep, offsets)?.with_kerr(params.kerr_ratio, scaling))
}

/// Predicted visibility of one scan point, marginalized over the occupation.
pub trait VisibilityModel: Sync {
    fn visibility(&self, params: &FitParams, scan: ScanKind, t: f64, nbar: TruncatedNormal) -> Result<f64>;
}

/// Truncated-Wigner forward model with a fixed set of random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardConfig {
    pub n_trajectories: usize,
    pub seed: u64,
    pub design: ScanDesign,
    #[serde(default)]
    pub kerr_scaling: KerrScaling,
}

/// Common random numbers: trajectory `j` keeps the same two normal deviates
/// and the same uniform (mapped to its occupation by inverse CDF) for every
/// parameter value, which makes the likelihood smooth and deterministic.
#[derive(Debug, Clone)]
pub struct TwaForwardModel {
    config: ForwardConfig,
    base: Vec<[f64; 3]>,
}

impl TwaForwardModel {
    pub fn new(config: ForwardConfig) -> Result<Self> {
        if config.n_trajectories == 0 {
            return Err(invalid("n_trajectories", "must be at least 1"));
        }
        let base = (0..config.n_trajectories)
            .into_par_iter()
            .map(|j| {
                let mut rng = stream_rng(config.seed, j as u64);
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let u: f64 = rng.random();
                [z1, z2, u]
            })
            .collect();
        Ok(TwaForwardModel { config, base })
    }

    pub fn config(&self) -> &ForwardConfig {
        &self.config
    }

    /// Per-trajectory amplitude factors `√(2n̄_j + 1)`.
    pub fn scales(&self, nbar: TruncatedNormal) -> Vec<f64> {
        self.base.iter().map(|b| (2.0 * nbar.quantile(b[2]) + 1.0).sqrt()).collect()
    }

    /// Vacuum of the deep trap, scaled per trajectory, through the QEQ with the
    /// Kerr-number flow; returns `|⟨exp(2iη₁q)⟩|`.
    pub fn visibility_with_scales(&self, params: &FitParams, scan: ScanKind, t: f64, scales: &[f64]) -> Result<f64> {
        if !params.is_valid() {
            return Err(invalid("params", "outside the physical domain"));
        }
        let (nom_shallow, nom_deep) = self.config.design.durations(scan, t);
        let big_t = nom_shallow + params.t_off_shallow;
        let tau = nom_deep + params.t_off_deep;
        if big_t < 0.0 || tau < 0.0 {
            return Err(invalid("offsets", "negative effective duration"));
        }
        let (w1, w2) = (params.omega1, params.omega2());
        let (k_shallow, k_deep) = segment_kerr(params, self.config.kerr_scaling);
        let r = (-params.s1).exp();
        let probe = 2.0 * LambDicke::rb87(w1)?.value();
        let base = &self.base;
        let chi = mean_phasor(base.len(), |j| {
            let s = scales[j];
            let mut q = s * base[j][0] * r;
            let mut p = s * base[j][1] / r;
            let action = 0.25 * (q * q + p * p);
            let (sn, cs) = ((w2 - k_shallow + 2.0 * k_shallow * action) * big_t).sin_cos();
            (q, p) = (q * cs + p * sn, p * cs - q * sn);
            q /= r;
            p *= r;
            let action = 0.25 * (q * q + p * p);
            let (sn, cs) = ((w1 - k_deep + 2.0 * k_deep * action) * tau).sin_cos();
            probe * (q * cs + p * sn)
        });
        Ok(chi.norm())
    }
}

impl VisibilityModel for TwaForwardModel {
    fn visibility(&self, params: &FitParams, scan: ScanKind, t: f64, nbar: TruncatedNormal) -> Result<f64> {
        self.visibility_with_scales(params, scan, t, &self.scales(nbar))
    }
}

/// Fock-basis forward model with a fixed occupation (no marginalization).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactForwardModel {
    pub design: ScanDesign,
    pub kerr_scaling: KerrScaling,
    pub dim: usize,
}

impl VisibilityModel for ExactForwardModel {
    fn visibility(&self, params: &FitParams, scan: ScanKind, t: f64, nbar: TruncatedNormal) -> Result<f64> {
        if nbar.sd != 0.0 {
            return Err(Error::BackendMismatch("the Fock model takes a fixed occupation".into()));
        }
        let seq = scan_sequence(params, &self.design, self.kerr_scaling, scan, t)?;
        let init = MotionalState::exact(FockDensityMatrix::thermal(nbar.mean, self.dim)?);
        let end = run_to_end(&init, &seq)?;
        Ok(end.visibility(LambDicke::rb87(params.omega1)?).0)
    }
}

/// Closed-form Gaussian model; harmonic only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticForwardModel {
    pub design: ScanDesign,
}

impl VisibilityModel for AnalyticForwardModel {
    fn visibility(&self, params: &FitParams, scan: ScanKind, t: f64, nbar: TruncatedNormal) -> Result<f64> {
        if params.kerr_ratio != 0.0 || nbar.sd != 0.0 {
            return Err(Error::BackendMismatch("the Gaussian model needs K = 0 and a fixed occupation".into()));
        }
        let seq = scan_sequence(params, &self.design, KerrScaling::FrequencyRatio, scan, t)?;
        let init = MotionalState::Analytic(GaussianState::thermal(nbar.mean)?);
        let end = run_to_end(&init, &seq)?;
        Ok(end.visibility(LambDicke::rb87(params.omega1)?).0)
    }
}

fn gaussian_log_density(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * PI).ln()
}

/// `Σ_j ln N(V_j | ⟨⟨V(t_j, θ)⟩⟩, σ_j)` for any forward model.
pub fn log_likelihood(params: &FitParams, data: &[VisibilityDatum], model: &dyn VisibilityModel) -> f64 {
    if !params.is_valid() {
        return f64::NEG_INFINITY;
    }
    let mut total = 0.0;
    for d in data {
        match model.visibility(params, d.scan_kind, d.t, TruncatedNormal { mean: d.nbar, sd: d.sigma_nbar }) {
            Ok(v) => total += gaussian_log_density(d.v_st, v, d.sigma_v),
            Err(_) => return f64::NEG_INFINITY,
        }
    }
    total
}

/// TWA likelihood with the per-datum occupation draws precomputed.
#[derive(Debug, Clone)]
pub struct TwaLikelihood {
    model: TwaForwardModel,
    data: Vec<VisibilityDatum>,
    scales: Vec<Vec<f64>>,
}

impl TwaLikelihood {
    pub fn new(model: TwaForwardModel, data: Vec<VisibilityDatum>) -> Result<Self> {
        if data.is_empty() {
            return Err(invalid("data", "empty dataset"));
        }
        for d in &data {
            d.validate()?;
        }
        let scales = data.iter().map(|d| model.scales(TruncatedNormal { mean: d.nbar, sd: d.sigma_nbar })).collect();
        Ok(TwaLikelihood { model, data, scales })
    }

    pub fn data(&self) -> &[VisibilityDatum] {
        &self.data
    }

    pub fn model(&self) -> &TwaForwardModel {
        &self.model
    }

    pub fn predictions(&self, params: &FitParams) -> Result<Vec<f64>> {
        self.data.iter().zip(&self.scales).map(|(d, s)| self.model.visibility_with_scales(params, d.scan_kind, d.t, s)).collect()
    }

    pub fn log_likelihood(&self, params: &FitParams) -> f64 {
        if !params.is_valid() {
            return f64::NEG_INFINITY;
        }
        match self.predictions(params) {
            Ok(pred) => self.data.iter().zip(pred).map(|(d, v)| gaussian_log_density(d.v_st, v, d.sigma_v)).sum(),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

/// Gaussian prior on `ω₁/2π`, uniform boxes on the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub f1_mean_khz: f64,
    pub f1_sd_khz: f64,
    pub s1_max: f64,
    pub kerr_min: f64,
    pub kerr_max: f64,
    pub offset_min_us: f64,
    pub offset_max_us: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Priors { f1_mean_khz: 37.8, f1_sd_khz: 0.3, s1_max: 1.5, kerr_min: -0.05, kerr_max: 0.0, offset_min_us: -10.0, offset_max_us: 10.0 }
    }
}

impl Priors {
    pub fn log_prior(&self, params: &FitParams) -> f64 {
        let x = params.to_vector();
        let inside = x[0] > 0.0
            && x[0] <= self.s1_max
            && (self.kerr_min..=self.kerr_max).contains(&x[1])
            && (self.offset_min_us..=self.offset_max_us).contains(&x[2])
            && (self.offset_min_us..=self.offset_max_us).contains(&x[3]);
        if !inside {
            return f64::NEG_INFINITY;
        }
        let box_volume = self.s1_max * (self.kerr_max - self.kerr_min) * (self.offset_max_us - self.offset_min_us).powi(2);
        gaussian_log_density(x[4], self.f1_mean_khz, self.f1_sd_khz) - box_volume.ln()
    }

    /// Prior draw in sampling coordinates.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> [f64; 5] {
        let z: f64 = rng.sample(StandardNormal);
        [
            self.s1_max * (1.0 - rng.random::<f64>()),
            self.kerr_min + (self.kerr_max - self.kerr_min) * rng.random::<f64>(),
            self.offset_min_us + (self.offset_max_us - self.offset_min_us) * rng.random::<f64>(),
            self.offset_min_us + (self.offset_max_us - self.offset_min_us) * rng.random::<f64>(),
            self.f1_mean_khz + self.f1_sd_khz * z,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth() -> FitParams {
        FitParams { s1: 0.5, kerr_ratio: -0.011, t_off_shallow: 4.2e-6, t_off_deep: 0.5e-6, omega1: khz_to_angular(37.9) }
    }

    fn design() -> ScanDesign {
        ScanDesign { fixed_shallow: 19.53e-6, fixed_deep: 6.0e-6 }
    }

    #[test]
    fn vector_round_trip() {
        let p = truth();
        let back = FitParams::from_vector(&p.to_vector());
        assert!((back.t_off_shallow - p.t_off_shallow).abs() < 1e-18);
        assert!((back.omega1 - p.omega1).abs() < 1e-9);
    }

    #[test]
    fn invalid_params_minus_infinity() {
        let model = AnalyticForwardModel { design: design() };
        let data = [VisibilityDatum { t: 1e-6, v_st: 0.8, sigma_v: 0.03, nbar: 0.0, sigma_nbar: 0.0, scan_kind: ScanKind::DeepScan }];
        let mut p = truth();
        p.kerr_ratio = 0.01;
        assert_eq!(log_likelihood(&p, &data, &model), f64::NEG_INFINITY);
        p.kerr_ratio = -0.01;
        p.s1 = 0.0;
        assert_eq!(log_likelihood(&p, &data, &model), f64::NEG_INFINITY);
    }

    #[test]
    fn twa_matches_exact_at_zero_kerr() {
        let mut p = truth();
        p.kerr_ratio = 0.0;
        let twa = TwaForwardModel::new(ForwardConfig { n_trajectories: 40_000, seed: 3, design: design(), kerr_scaling: KerrScaling::FixedCoefficient }).unwrap();
        let exact = AnalyticForwardModel { design: design() };
        for (scan, t) in [(ScanKind::DeepScan, 3e-6), (ScanKind::ShallowScan, 12e-6)] {
            let a = twa.visibility(&p, scan, t, TruncatedNormal::point(0.4)).unwrap();
            let b = exact.visibility(&p, scan, t, TruncatedNormal::point(0.4)).unwrap();
            assert!((a - b).abs() < 0.01, "{a} vs {b}");
        }
    }

    #[test]
    fn likelihood_is_deterministic() {
        let data: Vec<VisibilityDatum> = (0..5)
            .map(|i| VisibilityDatum { t: (2 + 3 * i) as f64 * 1e-6, v_st: 0.8, sigma_v: 0.03, nbar: 0.5, sigma_nbar: 0.1, scan_kind: ScanKind::DeepScan })
            .collect();
        let cfg = ForwardConfig { n_trajectories: 3000, seed: 1, design: design(), kerr_scaling: KerrScaling::FixedCoefficient };
        let a = TwaLikelihood::new(TwaForwardModel::new(cfg).unwrap(), data.clone()).unwrap();
        let b = TwaLikelihood::new(TwaForwardModel::new(cfg).unwrap(), data).unwrap();
        assert_eq!(a.log_likelihood(&truth()).to_bits(), b.log_likelihood(&truth()).to_bits());
    }

    #[test]
    fn prior_support() {
        let pr = Priors::default();
        assert!(pr.log_prior(&truth()).is_finite());
        let mut p = truth();
        p.t_off_shallow = 11e-6;
        assert_eq!(pr.log_prior(&p), f64::NEG_INFINITY);
    }
}
