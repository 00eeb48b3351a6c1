//! Synthetic QEQ scan datasets drawn from the forward model.

use super::dataset::{ScanKind, VisibilityDatum};
use super::model::{FitParams, ForwardConfig, ScanDesign, TwaForwardModel};
use crate::error::{invalid, Result};
use crate::numeric::{derive_seed, linspace, stream_rng, TruncatedNormal};
use crate::protocol::KerrScaling;
use crate::units::{khz_to_angular, us_to_s};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub truth: FitParams,
    pub design: ScanDesign,
    pub points_per_scan: usize,
    /// Scanned nominal durations span `[t_min, t_max]`, seconds.
    pub t_min: f64,
    pub t_max: f64,
    pub sigma_v: f64,
    pub nbar_min: f64,
    pub nbar_max: f64,
    pub sigma_nbar: f64,
    pub n_trajectories: usize,
    #[serde(default)]
    pub kerr_scaling: KerrScaling,
}

impl SyntheticConfig {
    /// Truth and layout used throughout the tests: 25 points per scan.
    pub fn reference() -> Self {
        SyntheticConfig {
            truth: reference_truth(),
            design: ScanDesign { fixed_shallow: us_to_s(19.53), fixed_deep: us_to_s(6.0) },
            points_per_scan: 25,
            t_min: us_to_s(0.5),
            t_max: us_to_s(40.0),
            sigma_v: 0.03,
            nbar_min: 0.3,
            nbar_max: 0.8,
            sigma_nbar: 0.05,
            n_trajectories: 50_000,
            kerr_scaling: KerrScaling::default(),
        }
    }
}

/// `S₁ = 0.50, K/ω₁ = −0.011, offsets 4.2/0.5 μs, ω₁/2π = 37.9 kHz`.
pub fn reference_truth() -> FitParams {
    FitParams { s1: 0.50, kerr_ratio: -0.011, t_off_shallow: us_to_s(4.2), t_off_deep: us_to_s(0.5), omega1: khz_to_angular(37.9) }
}

/// Shallow scan followed by deep scan. Each point gets a uniform occupation
/// in `[nbar_min, nbar_max]`, a marginalized model visibility, and Gaussian
/// noise of width `sigma_v`.
pub fn synthetic_dataset(config: &SyntheticConfig, seed: u64) -> Result<Vec<VisibilityDatum>> {
    if config.points_per_scan == 0 || !(config.t_max >= config.t_min) {
        return Err(invalid("points_per_scan", "need at least one point and t_max ≥ t_min"));
    }
    if !(config.nbar_min >= 0.0 && config.nbar_max >= config.nbar_min) {
        return Err(invalid("nbar_min", "need 0 ≤ nbar_min ≤ nbar_max"));
    }
    let model = TwaForwardModel::new(ForwardConfig {
        n_trajectories: config.n_trajectories,
        seed: derive_seed(seed, "synthetic-ensemble"),
        design: config.design,
        kerr_scaling: config.kerr_scaling,
    })?;
    let noise_seed = derive_seed(seed, "synthetic-noise");
    let times = linspace(config.t_min, config.t_max, config.points_per_scan);
    let mut data = Vec::with_capacity(2 * times.len());
    for (s, scan) in [ScanKind::ShallowScan, ScanKind::DeepScan].into_iter().enumerate() {
        for (i, &t) in times.iter().enumerate() {
            let mut rng = stream_rng(noise_seed, (s * times.len() + i) as u64);
            let nbar = config.nbar_min + (config.nbar_max - config.nbar_min) * rng.random::<f64>();
            let v = model.visibility_with_scales(&config.truth, scan, t, &model.scales(TruncatedNormal::new(nbar, config.sigma_nbar)?))?;
            let noise: f64 = rng.sample(StandardNormal);
            data.push(VisibilityDatum { t, v_st: v + config.sigma_v * noise, sigma_v: config.sigma_v, nbar, sigma_nbar: config.sigma_nbar, scan_kind: scan });
        }
    }
    Ok(data)
}
