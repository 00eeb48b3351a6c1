//! Dimensionless single-mode Gaussian phase space.
//!
//! Conventions: `q = a + a†`, `p = -i(a - a†)`, `[q, p] = 2i`. The vacuum has unit
//! covariance, and the interferometer probes the characteristic function at
//! `(2η, 0)`.

use crate::error::{invalid, require_non_negative, require_positive, Error, Result};
use crate::units::{HBAR, RB87_D2_WAVELENGTH, RB87_MASS};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Mat2 = [[f64; 2]; 2];

/// Fixed constants of the dimensionless convention.
pub struct PhaseSpaceConventions;

impl PhaseSpaceConventions {
    /// `[q, p] = COMMUTATOR_SCALE · i`.
    pub const COMMUTATOR_SCALE: f64 = 2.0;
    /// Quadrature variance of the vacuum.
    pub const VACUUM_VARIANCE: f64 = 1.0;
    /// Smallest admissible covariance eigenvalue.
    pub const PD_TOLERANCE: f64 = 1e-10;
}

/// Visibility and fringe phase read off the characteristic function at the probe point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub v: f64,
    pub alpha: f64,
}

impl Visibility {
    pub fn from_chi(chi: Complex64) -> Self {
        Visibility { v: chi.norm(), alpha: chi.arg() }
    }
}

#[derive(Deserialize)]
struct RawGaussian {
    d: [f64; 2],
    sigma: Mat2,
}

impl TryFrom<RawGaussian> for GaussianState {
    type Error = Error;
    fn try_from(raw: RawGaussian) -> Result<Self> {
        GaussianState::new(raw.d, raw.sigma)
    }
}

/// First moments and symmetrized covariance of a single-mode Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGaussian")]
pub struct GaussianState {
    d: [f64; 2],
    sigma: Mat2,
}

impl GaussianState {
    /// Build a physical state: symmetric, positive definite, `det σ ≥ 1`.
    pub fn new(d: [f64; 2], sigma: Mat2) -> Result<Self> {
        let s = Self::from_moments(d, sigma)?;
        let det = s.det();
        if det < 1.0 - 1e-9 {
            return Err(invalid("sigma", format!("violates the uncertainty bound: det = {det}")));
        }
        Ok(s)
    }

    /// Moment summary that only needs to be a valid covariance. Sample
    /// estimates can dip below the uncertainty bound by statistical noise.
    pub fn from_moments(d: [f64; 2], sigma: Mat2) -> Result<Self> {
        if d.iter().chain(sigma.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(invalid("sigma", "non-finite entry"));
        }
        let scale = sigma[0][0].abs().max(sigma[1][1].abs()).max(1.0);
        if (sigma[0][1] - sigma[1][0]).abs() > 1e-10 * scale {
            return Err(invalid("sigma", "not symmetric"));
        }
        let off = 0.5 * (sigma[0][1] + sigma[1][0]);
        let sigma = [[sigma[0][0], off], [off, sigma[1][1]]];
        let (lo, _) = sym_eigenvalues(&sigma);
        if lo <= PhaseSpaceConventions::PD_TOLERANCE {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: lo });
        }
        Ok(GaussianState { d, sigma })
    }

    pub fn vacuum() -> Self {
        GaussianState { d: [0.0, 0.0], sigma: [[1.0, 0.0], [0.0, 1.0]] }
    }

    pub fn thermal(nbar: f64) -> Result<Self> {
        require_non_negative("nbar", nbar)?;
        let v = 2.0 * nbar + 1.0;
        Ok(GaussianState { d: [0.0, 0.0], sigma: [[v, 0.0], [0.0, v]] })
    }

    pub fn mean(&self) -> [f64; 2] {
        self.d
    }

    pub fn covariance(&self) -> Mat2 {
        self.sigma
    }

    pub fn det(&self) -> f64 {
        self.sigma[0][0] * self.sigma[1][1] - self.sigma[0][1] * self.sigma[1][0]
    }

    /// Covariance eigenvalues, ascending.
    pub fn eigenvalues(&self) -> (f64, f64) {
        sym_eigenvalues(&self.sigma)
    }

    /// Apply a linear symplectic map `x ← M x`.
    pub fn transform(&self, m: &Mat2) -> Self {
        let d = mat_vec(m, &self.d);
        let sigma = symmetrize(mat_mul(&mat_mul(m, &self.sigma), &transpose(m)));
        GaussianState { d, sigma }
    }

    pub fn squeeze(&self, s: f64, theta: f64) -> Self {
        self.transform(&squeeze_matrix(s, theta))
    }

    pub fn rotate(&self, phi: f64) -> Self {
        self.transform(&rotation_matrix(phi))
    }

    pub fn displace(&self, dq: f64, dp: f64) -> Self {
        GaussianState { d: [self.d[0] + dq, self.d[1] + dp], sigma: self.sigma }
    }

    pub fn quench_rescale(&self, omega_from: f64, omega_to: f64) -> Result<Self> {
        Ok(self.transform(&quench_matrix(omega_from, omega_to)?))
    }

    /// `Tr[ρ exp(i(ξ_q q + ξ_p p))] = exp(i ξ·d − ½ ξᵀσξ)`.
    pub fn characteristic(&self, xi: [f64; 2]) -> Complex64 {
        let quad = xi[0] * xi[0] * self.sigma[0][0]
            + 2.0 * xi[0] * xi[1] * self.sigma[0][1]
            + xi[1] * xi[1] * self.sigma[1][1];
        let phase = xi[0] * self.d[0] + xi[1] * self.d[1];
        Complex64::from_polar((-0.5 * quad).exp(), phase)
    }

    /// Wigner function, normalized so that `∫∫ W dq dp = 1`.
    pub fn wigner(&self, q: f64, p: f64) -> f64 {
        let x = [q - self.d[0], p - self.d[1]];
        let det = self.det();
        let inv = [[self.sigma[1][1] / det, -self.sigma[0][1] / det], [-self.sigma[1][0] / det, self.sigma[0][0] / det]];
        let quad = x[0] * (inv[0][0] * x[0] + inv[0][1] * x[1]) + x[1] * (inv[1][0] * x[0] + inv[1][1] * x[1]);
        (-0.5 * quad).exp() / (2.0 * PI * det.sqrt())
    }

    pub fn visibility(&self, eta: LambDicke) -> Visibility {
        gaussian_visibility(self, eta)
    }
}

/// Lamb-Dicke parameter `η = k·√(ħ/2mω)` of the probe in a given trap.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LambDicke(f64);

impl LambDicke {
    /// ⁸⁷Rb at ω/2π = 37.8 kHz with a 780 nm probe, rounded to three digits.
    pub const DEFAULT: LambDicke = LambDicke(0.316);

    pub fn new(eta: f64) -> Result<Self> {
        require_positive("eta", eta)?;
        Ok(LambDicke(eta))
    }

    pub fn from_physical(wavevector: f64, mass: f64, omega: f64) -> Result<Self> {
        require_positive("wavevector", wavevector)?;
        require_positive("mass", mass)?;
        require_positive("omega", omega)?;
        Self::new(wavevector * (HBAR / (2.0 * mass * omega)).sqrt())
    }

    /// ⁸⁷Rb probed on the D2 line in a trap of angular frequency `omega`.
    pub fn rb87(omega: f64) -> Result<Self> {
        Self::from_physical(2.0 * PI / RB87_D2_WAVELENGTH, RB87_MASS, omega)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Same physical wavevector expressed in the units of another trap.
    pub fn rescaled(self, omega_from: f64, omega_to: f64) -> Result<Self> {
        require_positive("omega_from", omega_from)?;
        require_positive("omega_to", omega_to)?;
        Self::new(self.0 * (omega_from / omega_to).sqrt())
    }

    /// Probe point `(2η, 0)` of the characteristic function.
    pub fn probe(self) -> [f64; 2] {
        [2.0 * self.0, 0.0]
    }

    /// Ground-state visibility `exp(−2η²)`.
    pub fn sql_visibility(self) -> f64 {
        (-2.0 * self.0 * self.0).exp()
    }
}

/// Trap frequency, anharmonicity and initial thermal occupation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    pub omega: f64,
    pub kerr_ratio: f64,
    pub nbar: f64,
}

impl TrapParams {
    pub fn new(omega: f64, kerr_ratio: f64, nbar: f64) -> Result<Self> {
        require_positive("omega", omega)?;
        require_non_negative("nbar", nbar)?;
        if !kerr_ratio.is_finite() {
            return Err(invalid("kerr_ratio", "non-finite"));
        }
        Ok(TrapParams { omega, kerr_ratio, nbar })
    }

    /// Kerr coefficient `K` in rad/s.
    pub fn kerr(&self) -> f64 {
        self.kerr_ratio * self.omega
    }
}

pub fn vacuum_state() -> GaussianState {
    GaussianState::vacuum()
}

pub fn thermal_state(nbar: f64) -> Result<GaussianState> {
    GaussianState::thermal(nbar)
}

pub fn apply_squeeze(s: &GaussianState, squeeze: f64, theta: f64) -> GaussianState {
    s.squeeze(squeeze, theta)
}

pub fn apply_rotation(s: &GaussianState, phi: f64) -> GaussianState {
    s.rotate(phi)
}

pub fn quench_rescale(s: &GaussianState, omega_from: f64, omega_to: f64) -> Result<GaussianState> {
    s.quench_rescale(omega_from, omega_to)
}

/// `V = exp(−2η²σ₁₁)`, `α = 2η⟨q⟩`.
pub fn gaussian_visibility(s: &GaussianState, eta: LambDicke) -> Visibility {
    let e = eta.value();
    Visibility { v: (-2.0 * e * e * s.sigma[0][0]).exp(), alpha: 2.0 * e * s.d[0] }
}

/// Thermal power law `V_st = V_sq^(2n̄+1)`.
pub fn squeezed_thermal_visibility(v_sq: f64, nbar: f64) -> Result<f64> {
    require_non_negative("nbar", nbar)?;
    if !(0.0..=1.0).contains(&v_sq) {
        return Err(invalid("v_sq", format!("must lie in [0, 1], got {v_sq}")));
    }
    if v_sq == 0.0 {
        return Ok(0.0);
    }
    Ok(v_sq.powf(2.0 * nbar + 1.0))
}

/// Symplectic squeeze for `ζ = S·e^{iθ}`. Positive `S` at `θ = 0` compresses `q`.
pub fn squeeze_matrix(s: f64, theta: f64) -> Mat2 {
    let (ch, sh) = (s.cosh(), s.sinh());
    let (sn, cs) = theta.sin_cos();
    [[ch - sh * cs, -sh * sn], [-sh * sn, ch + sh * cs]]
}

/// Heisenberg rotation for harmonic evolution by phase `φ = ωt`:
/// `q ← q cos φ + p sin φ`, `p ← p cos φ − q sin φ`.
pub fn rotation_matrix(phi: f64) -> Mat2 {
    let (s, c) = phi.sin_cos();
    [[c, s], [-s, c]]
}

/// Diagonal rescaling re-expressing a state in the units of a new trap.
pub fn quench_matrix(omega_from: f64, omega_to: f64) -> Result<Mat2> {
    require_positive("omega_from", omega_from)?;
    require_positive("omega_to", omega_to)?;
    let r = (omega_to / omega_from).sqrt();
    Ok([[r, 0.0], [0.0, 1.0 / r]])
}

/// Squeeze parameter equivalent to a sudden quench: `S = ½ ln(ω_from/ω_to)`.
pub fn quench_squeeze_parameter(omega_from: f64, omega_to: f64) -> f64 {
    0.5 * (omega_from / omega_to).ln()
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat_vec(a: &Mat2, v: &[f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

pub fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn symmetrize(a: Mat2) -> Mat2 {
    let off = 0.5 * (a[0][1] + a[1][0]);
    [[a[0][0], off], [off, a[1][1]]]
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym_eigenvalues(a: &Mat2) -> (f64, f64) {
    let mean = 0.5 * (a[0][0] + a[1][1]);
    let half = 0.5 * (a[0][0] - a[1][1]);
    let r = half.hypot(a[0][1]);
    (mean - r, mean + r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vacuum_visibility_is_sql() {
        let v = gaussian_visibility(&vacuum_state(), LambDicke::DEFAULT);
        assert_relative_eq!(v.v, (-2.0f64 * 0.316 * 0.316).exp(), max_relative = 1e-15);
        assert!((v.v - 0.819).abs() < 1e-3);
        assert_eq!(vacuum_state().det(), 1.0);
    }

    #[test]
    fn thermal_half() {
        let s = thermal_state(0.5).unwrap();
        assert_eq!(s.covariance()[0][0], 2.0);
        let v = gaussian_visibility(&s, LambDicke::DEFAULT).v;
        assert!((v - 0.6707).abs() < 1e-3);
        assert_eq!(thermal_state(0.0).unwrap(), vacuum_state());
        assert!(thermal_state(-0.1).is_err());
    }

    #[test]
    fn squeeze_unit() {
        let s = apply_squeeze(&vacuum_state(), 1.0, 0.0);
        let c = s.covariance();
        assert_relative_eq!(c[0][0], (-2.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(c[1][1], 2.0f64.exp(), max_relative = 1e-14);
        let v = gaussian_visibility(&s, LambDicke::DEFAULT).v;
        assert!((v - 0.9733).abs() < 1e-4);
        assert_eq!(apply_squeeze(&vacuum_state(), 0.0, 0.3), vacuum_state());
    }

    #[test]
    fn squeezed_thermal_scales_variance() {
        let n = 0.7;
        let s = apply_squeeze(&thermal_state(n).unwrap(), 0.4, 0.0);
        assert_relative_eq!(s.covariance()[0][0], (2.0 * n + 1.0) * (-0.8f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn rotation_examples() {
        let sq = apply_squeeze(&vacuum_state(), 0.8, 0.0);
        let back = apply_rotation(&sq, 2.0 * PI);
        for i in 0..2 {
            for j in 0..2 {
                assert!((back.covariance()[i][j] - sq.covariance()[i][j]).abs() < 1e-12);
            }
        }
        let quarter = apply_rotation(&sq, PI / 2.0).covariance();
        assert_relative_eq!(quarter[0][0], 1.6f64.exp(), max_relative = 1e-12);
        assert_relative_eq!(quarter[1][1], (-1.6f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn rotated_squeezed_variance_formula() {
        let (s, theta0) = (0.6, 0.9);
        let st = apply_squeeze(&vacuum_state(), s, theta0);
        for k in 0..20 {
            let phi = 0.31 * k as f64;
            let got = apply_rotation(&st, phi).covariance()[0][0];
            let want = (2.0 * s).cosh() - (2.0 * s).sinh() * (theta0 - 2.0 * phi).cos();
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn quench_examples() {
        let w1 = 2.0 * PI * 37.8e3;
        let w2 = 2.0 * PI * 12.8e3;
        let s = quench_rescale(&vacuum_state(), w1, w2).unwrap();
        let c = s.covariance();
        assert_relative_eq!(c[0][0], w2 / w1, max_relative = 1e-14);
        assert_relative_eq!(c[1][1], w1 / w2, max_relative = 1e-14);
        let s1 = quench_squeeze_parameter(w1, w2);
        assert!((s1 - 0.5414).abs() < 1e-4);
        assert_eq!(quench_rescale(&s, w1, w1).unwrap(), s);
        assert!(quench_rescale(&s, 0.0, w1).is_err());
        // quarter period in the shallow trap, then back to the deep trap
        let out = quench_rescale(&s.rotate(PI / 2.0), w2, w1).unwrap();
        let (lo, _) = out.eigenvalues();
        assert_relative_eq!(-0.5 * lo.ln(), 2.0 * s1, max_relative = 1e-12);
    }

    #[test]
    fn displaced_vacuum_phase() {
        let s = vacuum_state().displace(1.0, 0.0);
        let v = gaussian_visibility(&s, LambDicke::DEFAULT);
        assert_eq!(v.v, gaussian_visibility(&vacuum_state(), LambDicke::DEFAULT).v);
        assert_relative_eq!(v.alpha, 0.632, max_relative = 1e-14);
        let chi = s.characteristic(LambDicke::DEFAULT.probe());
        assert_relative_eq!(chi.arg(), v.alpha, max_relative = 1e-14);
    }

    #[test]
    fn power_law() {
        assert_eq!(squeezed_thermal_visibility(0.9, 0.0).unwrap(), 0.9);
        assert!((squeezed_thermal_visibility(0.9733, 0.5).unwrap() - 0.9473).abs() < 1e-4);
        assert_eq!(squeezed_thermal_visibility(0.0, 0.5).unwrap(), 0.0);
        assert!(squeezed_thermal_visibility(1.01, 0.5).is_err());
    }

    #[test]
    fn lamb_dicke_physical() {
        let eta = LambDicke::rb87(2.0 * PI * 37.8e3).unwrap();
        assert!((eta.value() - 0.316).abs() < 1e-3);
        let shallow = eta.rescaled(37.8, 12.8).unwrap();
        assert_relative_eq!(shallow.value(), eta.value() * (37.8f64 / 12.8).sqrt(), max_relative = 1e-14);
        assert!(LambDicke::new(0.0).is_err());
    }

    #[test]
    fn construction_rejects_bad_covariances() {
        assert!(GaussianState::new([0.0; 2], [[1.0, 0.0], [0.0, -1.0]]).is_err());
        assert!(GaussianState::new([0.0; 2], [[0.5, 0.0], [0.0, 0.5]]).is_err());
        assert!(GaussianState::from_moments([0.0; 2], [[0.5, 0.0], [0.0, 0.5]]).is_ok());
        assert!(GaussianState::new([0.0; 2], [[1.0, 0.2], [0.1, 1.0]]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = apply_squeeze(&thermal_state(0.3).unwrap(), 0.5, 1.0).displace(0.1, -0.2);
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"d\"") && text.contains("\"sigma\""));
        let back: GaussianState = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<GaussianState>(r#"{"d":[0,0],"sigma":[[1,0],[0,-1]]}"#).is_err());
    }

    #[test]
    fn wigner_normalized_vacuum_peak() {
        assert_relative_eq!(vacuum_state().wigner(0.0, 0.0), 1.0 / (2.0 * PI), max_relative = 1e-14);
    }
}
