//! Quench sequences run on any of the three state representations.
//!
//! Quenches are instantaneous: between segments the unchanged physical state is
//! re-expressed in the units of the new trap. The Lamb-Dicke parameter handed
//! to [`run_protocol`] refers to the trap of the first segment and is rescaled
//! per segment, so reported visibilities are those of one fixed physical probe.

use crate::error::{invalid, require_non_negative, require_positive, Error, Result};
use crate::fock::{FockDensityMatrix, ProbeOperator, QuarticPropagator};
use crate::phase_space::{GaussianState, LambDicke};
use crate::twa::{ClassicalFlow, TrajectoryEnsemble};
use crate::units::{self, HBAR, RB87_D1_WAVELENGTH, RB87_D2_WAVELENGTH, RB87_LINEWIDTH, SPEED_OF_LIGHT};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Which fitted duration offset, if any, is added to a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetSlot {
    Shallow,
    Deep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchSegment {
    pub omega: f64,
    /// `K/ω` for this segment's own frequency.
    pub kerr_ratio: f64,
    /// Nominal duration in seconds.
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<OffsetSlot>,
}

impl QuenchSegment {
    pub fn new(omega: f64, kerr_ratio: f64, duration: f64) -> Result<Self> {
        require_positive("omega", omega)?;
        require_non_negative("duration", duration)?;
        if !kerr_ratio.is_finite() {
            return Err(invalid("kerr_ratio", "non-finite"));
        }
        Ok(QuenchSegment { omega, kerr_ratio, duration, offset: None })
    }

    pub fn kerr(&self) -> f64 {
        self.kerr_ratio * self.omega
    }
}

/// Additive corrections to nominal durations, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DurationOffsets {
    /// Added to the shallow-trap duration `ΔT`.
    pub shallow: f64,
    /// Added to the deep-trap duration `Δt`.
    pub deep: f64,
}

/// How the Kerr coefficient carries over between traps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KerrScaling {
    /// Same `K/ω` in every trap.
    FrequencyRatio,
    /// Same `K` (rad/s) in every trap, i.e. a depth-independent quartic
    /// coefficient in dimensionless units.
    #[default]
    FixedCoefficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSequence {
    segments: Vec<QuenchSegment>,
    offsets: DurationOffsets,
}

impl ProtocolSequence {
    pub fn new(segments: Vec<QuenchSegment>, offsets: DurationOffsets) -> Result<Self> {
        if segments.is_empty() {
            return Err(invalid("segments", "need at least one segment"));
        }
        let seq = ProtocolSequence { segments, offsets };
        for i in 0..seq.segments.len() {
            let seg = &seq.segments[i];
            require_positive("omega", seg.omega)?;
            let d = seq.effective_duration(i);
            if !(d.is_finite() && d >= 0.0) {
                return Err(invalid("offsets", format!("segment {i} has negative effective duration {d:e} s")));
            }
        }
        Ok(seq)
    }

    pub fn segments(&self) -> &[QuenchSegment] {
        &self.segments
    }

    pub fn offsets(&self) -> DurationOffsets {
        self.offsets
    }

    pub fn effective_duration(&self, i: usize) -> f64 {
        let seg = &self.segments[i];
        seg.duration
            + match seg.offset {
                Some(OffsetSlot::Shallow) => self.offsets.shallow,
                Some(OffsetSlot::Deep) => self.offsets.deep,
                None => 0.0,
            }
    }

    /// Total effective duration.
    pub fn span(&self) -> f64 {
        (0..self.segments.len()).map(|i| self.effective_duration(i)).sum()
    }

    /// Start time of every segment on the effective clock.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut t = 0.0;
        (0..self.segments.len())
            .map(|i| {
                let start = t;
                t += self.effective_duration(i);
                start
            })
            .collect()
    }

    /// Assign Kerr coefficients from one ratio `K/ω_ref`, `ω_ref` being the
    /// first segment's frequency.
    pub fn with_kerr(mut self, kerr_ratio: f64, scaling: KerrScaling) -> Self {
        let omega_ref = self.segments[0].omega;
        for seg in &mut self.segments {
            seg.kerr_ratio = match scaling {
                KerrScaling::FrequencyRatio => kerr_ratio,
                KerrScaling::FixedCoefficient => kerr_ratio * omega_ref / seg.omega,
            };
        }
        self
    }
}

/// Deep preparation (zero length), shallow `ΔT`, deep `Δt`; harmonic until
/// [`ProtocolSequence::with_kerr`] is applied.
pub fn qeq_sequence(omega1: f64, omega2: f64, shallow: f64, deep: f64, offsets: DurationOffsets) -> Result<ProtocolSequence> {
    require_positive("omega1", omega1)?;
    require_positive("omega2", omega2)?;
    let prep = QuenchSegment::new(omega1, 0.0, 0.0)?;
    let mut s = QuenchSegment::new(omega2, 0.0, shallow)?;
    s.offset = Some(OffsetSlot::Shallow);
    let mut d = QuenchSegment::new(omega1, 0.0, deep)?;
    d.offset = Some(OffsetSlot::Deep);
    ProtocolSequence::new(vec![prep, s, d], offsets)
}

/// `π/(2ω)`.
pub fn quarter_period(omega: f64) -> f64 {
    PI / (2.0 * omega)
}

/// Fock-backend Hamiltonian.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FockHamiltonian {
    /// `ωn + Kn²`.
    #[default]
    DiagonalKerr,
    /// `(ω/4)(p² + q²) + (K/6)q⁴`.
    Quartic,
}

/// A motional state on one of the three backends.
#[derive(Debug, Clone)]
pub enum MotionalState {
    Analytic(GaussianState),
    Exact { rho: FockDensityMatrix, hamiltonian: FockHamiltonian },
    Trajectories { ensemble: TrajectoryEnsemble, flow: ClassicalFlow },
}

impl MotionalState {
    pub fn exact(rho: FockDensityMatrix) -> Self {
        MotionalState::Exact { rho, hamiltonian: FockHamiltonian::DiagonalKerr }
    }

    pub fn trajectories(ensemble: TrajectoryEnsemble) -> Self {
        MotionalState::Trajectories { ensemble, flow: ClassicalFlow::KerrNumber }
    }

    pub fn quench(&self, omega_from: f64, omega_to: f64) -> Result<Self> {
        Ok(match self {
            MotionalState::Analytic(g) => MotionalState::Analytic(g.quench_rescale(omega_from, omega_to)?),
            MotionalState::Exact { rho, hamiltonian } => {
                MotionalState::Exact { rho: rho.quench_rescale(omega_from, omega_to)?, hamiltonian: *hamiltonian }
            }
            MotionalState::Trajectories { ensemble, flow } => {
                MotionalState::Trajectories { ensemble: ensemble.quench_rescale(omega_from, omega_to)?, flow: *flow }
            }
        })
    }

    pub fn evolve(&self, omega: f64, kerr: f64, duration: f64) -> Result<Self> {
        Ok(match self {
            MotionalState::Analytic(g) => {
                if kerr != 0.0 {
                    return Err(Error::BackendMismatch("the Gaussian backend cannot represent Kerr evolution".into()));
                }
                MotionalState::Analytic(g.rotate(omega * duration))
            }
            MotionalState::Exact { rho, hamiltonian } => {
                let rho = match hamiltonian {
                    FockHamiltonian::DiagonalKerr => rho.evolve_kerr_diagonal(omega, kerr, duration),
                    FockHamiltonian::Quartic => crate::fock::evolve_quartic(rho, omega, kerr, duration)?,
                };
                MotionalState::Exact { rho, hamiltonian: *hamiltonian }
            }
            MotionalState::Trajectories { ensemble, flow } => {
                MotionalState::Trajectories { ensemble: ensemble.evolve(omega, kerr, duration, *flow)?, flow: *flow }
            }
        })
    }

    /// `(V, α, stderr)` at probe `(2η, 0)`.
    pub fn visibility(&self, eta: LambDicke) -> (f64, f64, f64) {
        match self {
            MotionalState::Analytic(g) => {
                let v = g.visibility(eta);
                (v.v, v.alpha, 0.0)
            }
            MotionalState::Exact { rho, .. } => {
                let v = rho.visibility(eta);
                (v.v, v.alpha, 0.0)
            }
            MotionalState::Trajectories { ensemble, .. } => {
                let v = ensemble.visibility(eta);
                (v.v, v.alpha, v.stderr)
            }
        }
    }

    /// Quadrature moments of the state.
    pub fn covariance(&self) -> Result<GaussianState> {
        match self {
            MotionalState::Analytic(g) => Ok(*g),
            MotionalState::Exact { rho, .. } => rho.moments(),
            MotionalState::Trajectories { ensemble, .. } => ensemble.covariance(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VisibilityTrace {
    pub times: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl VisibilityTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, v: f64, alpha: f64, stderr: f64) {
        self.times.push(t);
        self.v.push(v);
        self.alpha.push(alpha);
        self.stderr.push(stderr);
    }

    /// Index and value of the largest visibility.
    pub fn peak(&self) -> Option<(usize, f64)> {
        self.v.iter().copied().enumerate().fold(None, |best, (i, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
    }

    /// CSV with columns `t_us,V,alpha_rad,stderr`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_us", "V", "alpha_rad", "stderr"])?;
        for i in 0..self.len() {
            w.write_record([
                format!("{:.6}", units::s_to_us(self.times[i])),
                format!("{:.12e}", self.v[i]),
                format!("{:.12e}", self.alpha[i]),
                format!("{:.6e}", self.stderr[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluate the visibility at `sample_times` (seconds on the effective clock).
///
/// A time on a segment boundary is evaluated at the end of the earlier segment;
/// the quench does not change the physical state.
pub fn run_protocol(initial: &MotionalState, seq: &ProtocolSequence, eta: LambDicke, sample_times: &[f64]) -> Result<VisibilityTrace> {
    let span = seq.span();
    let tol = 1e-12 * span.max(1e-12);
    if let Some(&bad) = sample_times.iter().find(|t| !(t.is_finite() && **t >= -tol && **t <= span + tol)) {
        return Err(Error::TimeOutOfRange { time: bad, span });
    }
    let mut order: Vec<usize> = (0..sample_times.len()).collect();
    order.sort_by(|&a, &b| sample_times[a].total_cmp(&sample_times[b]));

    let segs = seq.segments();
    let starts = seq.boundaries();
    let omega_ref = segs[0].omega;
    let mut results = vec![(0.0, 0.0, 0.0); sample_times.len()];
    let mut next = 0;
    let mut state = initial.clone();

    for (i, seg) in segs.iter().enumerate() {
        if i > 0 {
            state = state.quench(segs[i - 1].omega, seg.omega)?;
        }
        let eta_i = eta.rescaled(omega_ref, seg.omega)?;
        let dur = seq.effective_duration(i);
        let end = starts[i] + dur;
        let last = i + 1 == segs.len();
        let mut in_segment = Vec::new();
        while next < order.len() {
            let t = sample_times[order[next]];
            if t <= end + tol || last {
                in_segment.push(order[next]);
                next += 1;
            } else {
                break;
            }
        }
        let offsets: Vec<f64> = in_segment.iter().map(|&j| (sample_times[j] - starts[i]).clamp(0.0, dur)).collect();
        let values = segment_samples(&state, seg, eta_i, &offsets)?;
        for (j, v) in in_segment.into_iter().zip(values) {
            results[j] = v;
        }
        if !last || dur > 0.0 {
            state = state.evolve(seg.omega, seg.kerr(), dur)?;
        }
    }

    let mut trace = VisibilityTrace::default();
    for (t, (v, a, e)) in sample_times.iter().zip(results) {
        trace.push(*t, v, a, e);
    }
    Ok(trace)
}

/// Visibilities at sorted offsets into one segment.
fn segment_samples(state: &MotionalState, seg: &QuenchSegment, eta: LambDicke, offsets: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    if offsets.is_empty() {
        return Ok(Vec::new());
    }
    let (omega, kerr) = (seg.omega, seg.kerr());
    match state {
        MotionalState::Exact { rho, hamiltonian } => {
            let probe = ProbeOperator::new(rho.dim(), 2.0 * eta.value());
            let read = |r: &FockDensityMatrix| {
                let chi = probe.expectation(r);
                (chi.norm(), chi.arg(), 0.0)
            };
            match hamiltonian {
                FockHamiltonian::DiagonalKerr => Ok(offsets.iter().map(|&t| read(&rho.evolve_kerr_diagonal(omega, kerr, t))).collect()),
                FockHamiltonian::Quartic => {
                    if kerr == 0.0 {
                        return Ok(offsets.iter().map(|&t| read(&rho.evolve_kerr_diagonal(omega, 0.0, t))).collect());
                    }
                    let prop = QuarticPropagator::new(omega, kerr, rho.dim())?;
                    offsets.iter().map(|&t| Ok(read(&prop.evolve(rho, t)?))).collect()
                }
            }
        }
        MotionalState::Trajectories { ensemble, flow: flow @ ClassicalFlow::Quartic { .. } } if kerr != 0.0 => {
            // chained integration between consecutive sample times
            let mut out = Vec::with_capacity(offsets.len());
            let mut current = ensemble.clone();
            let mut t_prev = 0.0;
            for &t in offsets {
                current = current.evolve(omega, kerr, t - t_prev, *flow)?;
                t_prev = t;
                let v = current.visibility(eta);
                out.push((v.v, v.alpha, v.stderr));
            }
            Ok(out)
        }
        _ => offsets.iter().map(|&t| Ok(state.evolve(omega, kerr, t)?.visibility(eta))).collect(),
    }
}

/// Final state after every segment of the sequence.
pub fn run_to_end(initial: &MotionalState, seq: &ProtocolSequence) -> Result<MotionalState> {
    let segs = seq.segments();
    let mut state = initial.clone();
    for (i, seg) in segs.iter().enumerate() {
        if i > 0 {
            state = state.quench(segs[i - 1].omega, seg.omega)?;
        }
        state = state.evolve(seg.omega, seg.kerr(), seq.effective_duration(i))?;
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveSqueezing {
    pub s_eff: f64,
    pub db: f64,
}

/// `S_eff = −½ ln λ_min`, `dB = −10 log₁₀ λ_min`.
pub fn effective_squeezing(cov: &GaussianState) -> Result<EffectiveSqueezing> {
    let (lo, _) = cov.eigenvalues();
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: lo });
    }
    Ok(EffectiveSqueezing { s_eff: -0.5 * lo.ln(), db: -10.0 * lo.log10() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringBudget {
    /// Photon scattering rate, 1/s.
    pub rate: f64,
    pub probability: f64,
}

/// Two-line (D1 + 2·D2 weighted) far-detuned scattering rate in a trap of
/// depth `depth_mk` at `wavelength_nm`, and the probability over `duration_s`.
pub fn scattering_budget(depth_mk: f64, wavelength_nm: f64, duration_s: f64) -> Result<ScatteringBudget> {
    require_positive("trap_depth_mK", depth_mk)?;
    require_positive("trap_wavelength_nm", wavelength_nm)?;
    require_non_negative("sequence_duration_s", duration_s)?;
    let lambda = wavelength_nm * 1e-9;
    let detuning = |line: f64| 2.0 * PI * SPEED_OF_LIGHT * (1.0 / lambda - 1.0 / line);
    let (d1, d2) = (detuning(RB87_D1_WAVELENGTH), detuning(RB87_D2_WAVELENGTH));
    for d in [d1, d2] {
        if d.abs() < 2.0 * PI * 1e9 {
            return Err(invalid("trap_wavelength_nm", "resonant with a D line"));
        }
    }
    let weight = ((1.0 / (d1 * d1) + 2.0 / (d2 * d2)) / (1.0 / d1 + 2.0 / d2)).abs();
    let u0 = units::mk_to_joule(depth_mk);
    let rate = RB87_LINEWIDTH * weight * u0 / HBAR;
    Ok(ScatteringBudget { rate, probability: rate * duration_s })
}
