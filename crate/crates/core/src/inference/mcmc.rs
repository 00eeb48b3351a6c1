//! Affine-invariant ensemble sampler with the stretch move, plus posterior
//! summaries.
//!
//! Walkers are split into two halves that are updated in turn, each half
//! proposing against the other's current positions. Walker `k` draws only from
//! its own ChaCha stream, so chains are identical at any thread count.

use super::dataset::VisibilityDatum;
use super::model::{FitParams, ForwardConfig, Priors, TwaForwardModel, TwaLikelihood};
use crate::error::{invalid, Result};
use crate::numeric::{derive_seed, quantile, stream_rng};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

/// Window constant for the integrated autocorrelation time.
const TAU_WINDOW: f64 = 5.0;
/// Burn-in length in autocorrelation times.
const BURN_IN_TAUS: f64 = 5.0;
/// Chains shorter than this many autocorrelation times are flagged.
const CONVERGENCE_TAUS: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSampler {
    pub n_walkers: usize,
    /// Stretch scale `a`.
    pub a: f64,
}

impl EnsembleSampler {
    pub fn new(n_walkers: usize) -> Self {
        EnsembleSampler { n_walkers, a: 2.0 }
    }

    /// Run `n_steps` ensemble updates from `initial` (one position per walker).
    pub fn run<F>(&self, log_prob: F, initial: &[Vec<f64>], n_steps: usize, seed: u64) -> Result<Chain>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let nw = self.n_walkers;
        if initial.len() != nw || nw < 4 || nw % 2 != 0 {
            return Err(invalid("n_walkers", "need an even number of walkers (at least 4), one start point each"));
        }
        let dim = initial[0].len();
        if dim == 0 || initial.iter().any(|x| x.len() != dim) {
            return Err(invalid("initial", "start points must share a positive dimension"));
        }
        if nw < 2 * dim + 2 {
            return Err(invalid("n_walkers", format!("need at least {} walkers for dimension {dim}", 2 * dim + 2)));
        }
        if !(self.a > 1.0) {
            return Err(invalid("a", "stretch scale must exceed 1"));
        }
        let mut pos: Vec<Vec<f64>> = initial.to_vec();
        let mut lp: Vec<f64> = pos.par_iter().map(|x| log_prob(x)).collect();
        if lp.iter().any(|v| !v.is_finite()) {
            return Err(invalid("initial", "every walker must start with finite log probability"));
        }
        let mut rngs: Vec<ChaCha8Rng> = (0..nw).map(|w| stream_rng(seed, w as u64)).collect();
        let mut chain = Chain { dim, n_walkers: nw, n_steps, positions: Vec::with_capacity(n_steps * nw * dim), log_prob: Vec::with_capacity(n_steps * nw), accepted: vec![0; nw] };
        let half = nw / 2;
        let a = self.a;
        for _ in 0..n_steps {
            for h in 0..2 {
                let (lo, hi) = if h == 0 { (0, half) } else { (half, nw) };
                let other: Vec<Vec<f64>> = if h == 0 { pos[half..].to_vec() } else { pos[..half].to_vec() };
                let updates: Vec<(Vec<f64>, f64, bool)> = rngs[lo..hi]
                    .par_iter_mut()
                    .zip(&pos[lo..hi])
                    .zip(&lp[lo..hi])
                    .map(|((rng, x), &lp_x)| {
                        let j = rng.random_range(0..other.len());
                        let u: f64 = rng.random();
                        let z = ((a - 1.0) * u + 1.0).powi(2) / a;
                        let y: Vec<f64> = x.iter().zip(&other[j]).map(|(xi, oj)| oj + z * (xi - oj)).collect();
                        let lp_y = log_prob(&y);
                        let log_accept = (dim as f64 - 1.0) * z.ln() + lp_y - lp_x;
                        let r: f64 = rng.random();
                        if lp_y.is_finite() && r.ln() < log_accept {
                            (y, lp_y, true)
                        } else {
                            (x.clone(), lp_x, false)
                        }
                    })
                    .collect();
                for (k, (y, l, acc)) in updates.into_iter().enumerate() {
                    pos[lo + k] = y;
                    lp[lo + k] = l;
                    chain.accepted[lo + k] += acc as u64;
                }
            }
            for (x, l) in pos.iter().zip(&lp) {
                chain.positions.extend_from_slice(x);
                chain.log_prob.push(*l);
            }
        }
        Ok(chain)
    }
}

/// Full sampler history, step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub dim: usize,
    pub n_walkers: usize,
    pub n_steps: usize,
    positions: Vec<f64>,
    log_prob: Vec<f64>,
    accepted: Vec<u64>,
}

impl Chain {
    pub fn position(&self, step: usize, walker: usize) -> &[f64] {
        let i = (step * self.n_walkers + walker) * self.dim;
        &self.positions[i..i + self.dim]
    }

    pub fn log_prob(&self, step: usize, walker: usize) -> f64 {
        self.log_prob[step * self.n_walkers + walker]
    }

    pub fn acceptance_fraction(&self) -> f64 {
        if self.n_steps == 0 {
            return 0.0;
        }
        self.accepted.iter().sum::<u64>() as f64 / (self.n_steps * self.n_walkers) as f64
    }

    pub fn series(&self, walker: usize, d: usize) -> Vec<f64> {
        (0..self.n_steps).map(|s| self.position(s, walker)[d]).collect()
    }

    /// Integrated autocorrelation time of coordinate `d`, from the
    /// walker-averaged autocorrelation function with an adaptive window.
    pub fn autocorr_time(&self, d: usize) -> f64 {
        let n = self.n_steps;
        if n < 2 {
            return f64::NAN;
        }
        let mut f = vec![0.0; n];
        for w in 0..self.n_walkers {
            for (acc, v) in f.iter_mut().zip(autocorrelation(&self.series(w, d))) {
                *acc += v;
            }
        }
        f.iter_mut().for_each(|v| *v /= self.n_walkers as f64);
        let mut tau = 1.0;
        for m in 1..n {
            tau += 2.0 * f[m];
            if (m as f64) >= TAU_WINDOW * tau {
                return tau;
            }
        }
        tau
    }
}

/// Normalized autocorrelation function via zero-padded FFT.
pub fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(m, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    buf.iter_mut().for_each(|c| *c = Complex::new(c.norm_sqr(), 0.0));
    planner.plan_fft_inverse(m).process(&mut buf);
    let c0 = buf[0].re;
    if c0 == 0.0 {
        let mut out = vec![0.0; n];
        out[0] = 1.0;
        return out;
    }
    buf[..n].iter().map(|c| c.re / c0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub acceptance_fraction: f64,
    pub autocorr_time: Vec<f64>,
    pub burn_in: usize,
    pub n_steps: usize,
    pub n_walkers: usize,
    /// Chain length exceeds 50 autocorrelation times.
    pub converged: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub median: f64,
    pub p16: f64,
    pub p84: f64,
}

impl ParamSummary {
    /// Half-width of the central 68% interval.
    pub fn sigma(&self) -> f64 {
        0.5 * (self.p84 - self.p16)
    }
}

/// Post-burn-in draws with sampler diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEnsemble {
    pub names: Vec<String>,
    /// Each row: one draw in sampling coordinates.
    pub samples: Vec<Vec<f64>>,
    pub log_prob: Vec<f64>,
    /// `(step, walker)` of each draw.
    pub origin: Vec<(usize, usize)>,
    pub diagnostics: Diagnostics,
}

impl PosteriorEnsemble {
    pub fn from_chain(chain: &Chain, names: &[&str]) -> Self {
        let tau: Vec<f64> = (0..chain.dim).map(|d| chain.autocorr_time(d)).collect();
        let tau_max = tau.iter().copied().fold(0.0, f64::max);
        let mut warnings = Vec::new();
        let mut burn_in = (BURN_IN_TAUS * tau_max).ceil() as usize;
        if burn_in > chain.n_steps / 2 {
            warnings.push(format!("burn-in of {burn_in} steps exceeds half the chain; capped"));
            burn_in = chain.n_steps / 2;
        }
        let converged = tau_max * CONVERGENCE_TAUS < chain.n_steps as f64;
        if !converged {
            warnings.push(format!("autocorrelation time {tau_max:.1} exceeds n_steps/{CONVERGENCE_TAUS}"));
        }
        let acc = chain.acceptance_fraction();
        if !(0.1..0.9).contains(&acc) {
            warnings.push(format!("acceptance fraction {acc:.3} outside (0.1, 0.9)"));
        }
        let mut samples = Vec::new();
        let mut log_prob = Vec::new();
        let mut origin = Vec::new();
        for s in burn_in..chain.n_steps {
            for w in 0..chain.n_walkers {
                samples.push(chain.position(s, w).to_vec());
                log_prob.push(chain.log_prob(s, w));
                origin.push((s, w));
            }
        }
        if samples.len() < 1000 {
            warnings.push(format!("only {} post-burn-in samples", samples.len()));
        }
        PosteriorEnsemble {
            names: names.iter().map(|s| s.to_string()).collect(),
            samples,
            log_prob,
            origin,
            diagnostics: Diagnostics { acceptance_fraction: acc, autocorr_time: tau, burn_in, n_steps: chain.n_steps, n_walkers: chain.n_walkers, converged, warnings },
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[d]).collect()
    }

    pub fn summary(&self) -> Vec<ParamSummary> {
        (0..self.names.len())
            .map(|d| {
                let mut col = self.column(d);
                col.sort_by(f64::total_cmp);
                ParamSummary { median: quantile(&col, 0.5), p16: quantile(&col, 0.16), p84: quantile(&col, 0.84) }
            })
            .collect()
    }

    /// Median draw as model parameters.
    pub fn median_params(&self) -> FitParams {
        let x: Vec<f64> = self.summary().iter().map(|s| s.median).collect();
        FitParams::from_vector(&x)
    }

    /// CSV `step,walker,<names…>,log_prob`.
    pub fn write_chain_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string(), "walker".to_string()];
        header.extend(self.names.iter().cloned());
        header.push("log_prob".into());
        w.write_record(&header)?;
        for ((s, lp), (step, walker)) in self.samples.iter().zip(&self.log_prob).zip(&self.origin) {
            let mut rec = vec![step.to_string(), walker.to_string()];
            rec.extend(s.iter().map(|v| format!("{v:.12e}")));
            rec.push(format!("{lp:.12e}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `{name: {median, p16, p84}}`.
    pub fn summary_json(&self) -> serde_json::Value {
        let map: BTreeMap<String, ParamSummary> = self.names.iter().cloned().zip(self.summary()).collect();
        serde_json::to_value(map).expect("summary serializes")
    }

    /// Binned 1D and pairwise 2D histograms for corner plots.
    pub fn corner_json(&self, bins_1d: usize, bins_2d: usize) -> serde_json::Value {
        let ranges: Vec<(f64, f64)> = (0..self.names.len())
            .map(|d| {
                let mut col = self.column(d);
                col.sort_by(f64::total_cmp);
                let (lo, hi) = (quantile(&col, 0.0), quantile(&col, 1.0));
                if hi > lo {
                    (lo, hi)
                } else {
                    (lo - 0.5, hi + 0.5)
                }
            })
            .collect();
        let bin = |v: f64, (lo, hi): (f64, f64), n: usize| (((v - lo) / (hi - lo) * n as f64) as usize).min(n - 1);
        let mut one_d = Vec::new();
        for (d, name) in self.names.iter().enumerate() {
            let mut counts = vec![0u64; bins_1d];
            for s in &self.samples {
                counts[bin(s[d], ranges[d], bins_1d)] += 1;
            }
            one_d.push(serde_json::json!({ "param": name, "range": [ranges[d].0, ranges[d].1], "counts": counts }));
        }
        let mut two_d = Vec::new();
        for i in 0..self.names.len() {
            for j in (i + 1)..self.names.len() {
                let mut counts = vec![vec![0u64; bins_2d]; bins_2d];
                for s in &self.samples {
                    counts[bin(s[i], ranges[i], bins_2d)][bin(s[j], ranges[j], bins_2d)] += 1;
                }
                two_d.push(serde_json::json!({
                    "x": self.names[i], "y": self.names[j],
                    "x_range": [ranges[i].0, ranges[i].1], "y_range": [ranges[j].0, ranges[j].1],
                    "counts": counts,
                }));
            }
        }
        serde_json::json!({ "hist1d": one_d, "hist2d": two_d })
    }
}

/// Downhill simplex minimization of `f` from `x0` with initial edge lengths `step`.
pub fn nelder_mead<F>(f: F, x0: &[f64], step: &[f64], max_evals: usize, ftol: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let v = eval(&x);
        simplex.push((x, v));
    }
    let mut evals = n + 1;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if (worst - best).abs() <= ftol * (1.0 + best.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|d| simplex[..n].iter().map(|s| s.0[d]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (w - c)).collect() };
        let xr = along(-1.0);
        let fr = eval(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let x = along(-0.5);
                let v = eval(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x);
                (x, v)
            };
            evals += 1;
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    s.0 = x_best.iter().zip(&s.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    s.1 = eval(&s.0);
                }
                evals += n;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v)
}

/// Settings for [`run_mcmc`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_walkers: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub forward: ForwardConfig,
    /// Starting guess for the maximum-a-posteriori search.
    pub start: FitParams,
    /// Function-evaluation budget of that search; 0 skips it.
    pub map_evals: usize,
}

/// Sampling-coordinate spread of the initial walker ball.
const BALL: [f64; 5] = [0.01, 0.001, 0.2, 0.2, 0.05];

/// Bayesian fit of QEQ visibility scans: MAP search, then ensemble sampling
/// from a small ball around the optimum.
pub fn run_mcmc(data: &[VisibilityDatum], priors: &Priors, config: &McmcConfig) -> Result<PosteriorEnsemble> {
    let mut forward = config.forward;
    forward.seed = derive_seed(config.seed, "crn");
    let like = TwaLikelihood::new(TwaForwardModel::new(forward)?, data.to_vec())?;
    let log_post = |x: &[f64]| -> f64 {
        let p = FitParams::from_vector(x);
        let lp = priors.log_prior(&p);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        lp + like.log_likelihood(&p)
    };
    let mut center = config.start.to_vector().to_vec();
    if !log_post(&center).is_finite() {
        return Err(invalid("start", "starting point has zero posterior density"));
    }
    if config.map_evals > 0 {
        let steps: Vec<f64> = BALL.iter().map(|b| 10.0 * b).collect();
        let (x, _) = nelder_mead(|x| -log_post(x), &center, &steps, config.map_evals, 1e-10);
        center = x;
    }
    let init_seed = derive_seed(config.seed, "walker-init");
    let initial: Vec<Vec<f64>> = (0..config.n_walkers)
        .map(|w| {
            let mut rng = stream_rng(init_seed, w as u64);
            for _ in 0..1000 {
                let x: Vec<f64> = center.iter().zip(BALL).map(|(c, b)| c + b * rng.sample::<f64, _>(StandardNormal)).collect();
                if log_post(&x).is_finite() {
                    return x;
                }
            }
            center.clone()
        })
        .collect();
    let chain = EnsembleSampler::new(config.n_walkers).run(log_post, &initial, config.n_steps, derive_seed(config.seed, "stretch"))?;
    Ok(PosteriorEnsemble::from_chain(&chain, &FitParams::NAMES))
}
