//! Deterministic reductions and random streams.
//!
//! Results must not depend on how rayon splits the work, so every parallel sum
//! goes through fixed-size chunks whose partial results are combined in index
//! order by a pairwise tree.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::ops::Add;

/// Items per parallel work unit. Part of the reproducibility contract: changing
/// it changes the floating-point summation order.
pub const CHUNK: usize = 2048;

const PAIRWISE_BASE: usize = 32;

/// Pairwise (cascade) summation of a slice.
pub fn pairwise_sum<T>(xs: &[T]) -> T
where
    T: Copy + Default + Add<Output = T>,
{
    if xs.len() <= PAIRWISE_BASE {
        return xs.iter().fold(T::default(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sum `f(i)` for `i in 0..n` with a partition-independent result.
pub fn chunked_sum<T, F>(n: usize, f: F) -> T
where
    T: Copy + Default + Add<Output = T> + Send + Sync,
    F: Fn(usize) -> T + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<T> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let vals: Vec<T> = (lo..hi).map(&f).collect();
            pairwise_sum(&vals)
        })
        .collect();
    pairwise_sum(&partials)
}

/// Mean of `exp(i·phase_j)` over `n` items.
pub fn mean_phasor<F>(n: usize, phase: F) -> Complex64
where
    F: Fn(usize) -> f64 + Sync,
{
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let s = chunked_sum(n, |i| {
        let (sn, cs) = phase(i).sin_cos();
        Complex64::new(cs, sn)
    });
    s / n as f64
}

/// Independent generator for item `index` of a run seeded with `seed`.
///
/// Stream selection makes the draw for item `i` a pure function of `(seed, i)`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derive a sub-seed for a named purpose so that modules sharing one run seed do
/// not reuse streams.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, mixed with the seed through splitmix64.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Linearly spaced points including both ends.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| lo + step * i as f64).collect()
        }
    }
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Trapezoid rule on a uniform grid with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (pairwise_sum(values) - 0.5 * (values[0] + values[n - 1])),
    }
}


/// Normal distribution truncated to `[0, ∞)`, sampled by inverse CDF so that a
/// fixed uniform draw maps smoothly onto the occupation for any `(mean, sd)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, sd: f64) -> crate::Result<Self> {
        crate::error::require_non_negative("mean", mean)?;
        crate::error::require_non_negative("sd", sd)?;
        Ok(TruncatedNormal { mean, sd })
    }

    pub fn point(mean: f64) -> Self {
        TruncatedNormal { mean, sd: 0.0 }
    }

    /// Quantile at `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        if self.sd == 0.0 {
            return self.mean;
        }
        let a = std_normal_cdf(-self.mean / self.sd);
        let p = (a + u * (1.0 - a)).clamp(1e-300, 1.0 - 1e-16);
        (self.mean + self.sd * std_normal_quantile(p)).max(0.0)
    }
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn std_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
    }

    #[test]
    fn chunked_sum_is_thread_count_independent() {
        let f = |i: usize| (i as f64 * 0.37).sin() / (1.0 + i as f64);
        let n = 50_001;
        let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| chunked_sum(n, f));
        let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| chunked_sum(n, f));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn streams_differ_and_repeat() {
        use rand::Rng;
        let a: u64 = stream_rng(7, 0).random();
        let b: u64 = stream_rng(7, 1).random();
        let c: u64 = stream_rng(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
        assert_ne!(derive_seed(7, "twa"), derive_seed(7, "mcmc"));
    }

    #[test]
    fn truncated_normal_quantiles() {
        let t = TruncatedNormal::new(0.5, 0.1).unwrap();
        assert!((t.quantile(0.5) - 0.5).abs() < 1e-6);
        let t = TruncatedNormal::new(0.0, 1.0).unwrap();
        // half-normal median is Φ⁻¹(0.75)
        assert!((t.quantile(0.5) - 0.674_489_750_196_081_7).abs() < 1e-9);
        assert!(t.quantile(0.0) >= 0.0);
        assert_eq!(TruncatedNormal::point(0.3).quantile(0.9), 0.3);
    }

    #[test]
    fn quantile_interpolates() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.5), 2.0);
        assert!((quantile(&xs, 0.125) - 0.5).abs() < 1e-15);
    }
}
