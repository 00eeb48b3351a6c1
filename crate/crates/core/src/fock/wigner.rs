//! Wigner grids by displacement-parity evaluation:
//! `W(q, p) = (1/2π) Tr[Πρ exp(i(p·q̂ − q·p̂))]`.

use super::kernel::ChiEvaluator;
use super::FockDensityMatrix;
use crate::error::{invalid, Error, Result};
use crate::numeric::trapezoid;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Largest marginal probability allowed outside the grid.
pub const GRID_TAIL_LIMIT: f64 = 1e-4;

/// Wigner function on a uniform rectangular grid; `values[i][j] = W(q_i, p_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub q_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl WignerGrid {
    pub fn new(q_axis: Vec<f64>, p_axis: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_axis("q_axis", &q_axis)?;
        check_axis("p_axis", &p_axis)?;
        if values.len() != q_axis.len() || values.iter().any(|row| row.len() != p_axis.len()) {
            return Err(Error::GridMismatch("values shape does not match the axes".into()));
        }
        Ok(WignerGrid { q_axis, p_axis, values })
    }

    pub fn dq(&self) -> f64 {
        self.q_axis[1] - self.q_axis[0]
    }

    pub fn dp(&self) -> f64 {
        self.p_axis[1] - self.p_axis[0]
    }

    /// `∫∫ W dq dp` by the trapezoid rule.
    pub fn normalization(&self) -> f64 {
        let rows: Vec<f64> = self.values.iter().map(|r| trapezoid(r, self.dp())).collect();
        trapezoid(&rows, self.dq())
    }

    /// `∫ W dp` at each `q`.
    pub fn marginal_q(&self) -> Vec<f64> {
        self.values.iter().map(|r| trapezoid(r, self.dp())).collect()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn same_axes(&self, other: &WignerGrid) -> bool {
        let close = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        close(&self.q_axis, &other.q_axis) && close(&self.p_axis, &other.p_axis)
    }

    /// Long-format CSV `q,p,W`, row-major in `q`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["q", "p", "W"])?;
        for (i, q) in self.q_axis.iter().enumerate() {
            for (j, p) in self.p_axis.iter().enumerate() {
                w.write_record([fmt(*q), fmt(*p), fmt(self.values[i][j])])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Parse { line: line + 2, reason: format!("column {k} is not a number") })
            };
            rows.push((parse(0)?, parse(1)?, parse(2)?));
        }
        let mut q_axis: Vec<f64> = Vec::new();
        for r in &rows {
            if q_axis.last() != Some(&r.0) {
                q_axis.push(r.0);
            }
        }
        if q_axis.is_empty() || rows.len() % q_axis.len() != 0 {
            return Err(Error::GridMismatch("rows do not form a rectangular grid".into()));
        }
        let np = rows.len() / q_axis.len();
        let p_axis: Vec<f64> = rows[..np].iter().map(|r| r.1).collect();
        let values = rows.chunks(np).map(|c| c.iter().map(|r| r.2).collect()).collect();
        WignerGrid::new(q_axis, p_axis, values)
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

fn check_axis(name: &'static str, axis: &[f64]) -> Result<()> {
    if axis.len() < 2 {
        return Err(invalid(name, "needs at least two points"));
    }
    let h = axis[1] - axis[0];
    if h <= 0.0 || axis.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(invalid(name, "must be uniform and increasing"));
    }
    Ok(())
}

/// Normalized Hermite functions for the quadrature `q = √2·x`:
/// `φ_n(q) = 2^{-1/4} ψ_n(q/√2)`, so that `∫ φ_m φ_n dq = δ_mn`.
fn hermite_functions(q: f64, n: usize) -> Vec<f64> {
    let x = q / std::f64::consts::SQRT_2;
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    let norm = 2f64.powf(-0.25);
    out[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n > 1 {
        out[1] = 2f64.sqrt() * x * out[0];
    }
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
    out.iter_mut().for_each(|v| *v *= norm);
    out
}

fn quadrature_density(rho: &FockDensityMatrix, axis: &[f64], momentum: bool) -> Vec<f64> {
    let s = rho.support(1e-15);
    let m = rho.matrix();
    // ⟨p|n⟩ = (−i)ⁿ φ_n(p)
    let phase = |n: usize| -> Complex64 {
        if !momentum {
            return Complex64::new(1.0, 0.0);
        }
        match n % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, -1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 1.0),
        }
    };
    axis.par_iter()
        .map(|&x| {
            let h = hermite_functions(x, s);
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..s {
                for b in 0..s {
                    acc += phase(a) * m[(a, b)] * phase(b).conj() * (h[a] * h[b]);
                }
            }
            acc.re
        })
        .collect()
}

/// `P(q) = ⟨q|ρ|q⟩`.
pub fn position_distribution(rho: &FockDensityMatrix, q_axis: &[f64]) -> Vec<f64> {
    quadrature_density(rho, q_axis, false)
}

/// `P(p) = ⟨p|ρ|p⟩`.
pub fn momentum_distribution(rho: &FockDensityMatrix, p_axis: &[f64]) -> Vec<f64> {
    quadrature_density(rho, p_axis, true)
}

pub fn wigner_grid(rho: &FockDensityMatrix, q_axis: &[f64], p_axis: &[f64]) -> Result<WignerGrid> {
    check_axis("q_axis", q_axis)?;
    check_axis("p_axis", p_axis)?;
    let tail_q = 1.0 - trapezoid(&position_distribution(rho, q_axis), q_axis[1] - q_axis[0]);
    let tail_p = 1.0 - trapezoid(&momentum_distribution(rho, p_axis), p_axis[1] - p_axis[0]);
    let tail = tail_q.max(tail_p);
    if tail > GRID_TAIL_LIMIT {
        return Err(Error::GridSupport { tail });
    }
    let ev = ChiEvaluator::with_parity(rho);
    let values: Vec<Vec<f64>> = q_axis
        .par_iter()
        .map(|&q| p_axis.iter().map(|&p| ev.eval(p, -q).re / (2.0 * PI)).collect())
        .collect();
    WignerGrid::new(q_axis.to_vec(), p_axis.to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linspace;

    #[test]
    fn vacuum_gaussian() {
        let v = FockDensityMatrix::vacuum(200).unwrap();
        let ax = linspace(-6.0, 6.0, 41);
        let g = wigner_grid(&v, &ax, &ax).unwrap();
        for (i, q) in ax.iter().enumerate() {
            for (j, p) in ax.iter().enumerate() {
                let want = (-(q * q + p * p) / 2.0).exp() / (2.0 * PI);
                assert!((g.values[i][j] - want).abs() < 1e-6);
            }
        }
        assert!((g.normalization() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn fock_one_negative_at_origin() {
        let r = FockDensityMatrix::number_state(1, 50).unwrap();
        let ax = linspace(-7.0, 7.0, 29);
        let g = wigner_grid(&r, &ax, &ax).unwrap();
        assert!(g.values[14][14] < 0.0);
        assert!((g.values[14][14] + 1.0 / (2.0 * PI)).abs() < 1e-10);
    }

    #[test]
    fn coherent_state_sits_at_its_mean() {
        let r = FockDensityMatrix::coherent(Complex64::new(0.5, 0.25), 60).unwrap();
        let g = crate::phase_space::vacuum_state().displace(1.0, 0.5);
        let ax = linspace(-6.0, 6.0, 25);
        let grid = wigner_grid(&r, &ax, &ax).unwrap();
        for (i, q) in ax.iter().enumerate() {
            for (j, p) in ax.iter().enumerate() {
                assert!((grid.values[i][j] - g.wigner(*q, *p)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn narrow_grid_rejected() {
        let v = FockDensityMatrix::thermal(1.0, 60).unwrap();
        let ax = linspace(-2.0, 2.0, 11);
        assert!(matches!(wigner_grid(&v, &ax, &ax), Err(Error::GridSupport { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let v = FockDensityMatrix::vacuum(30).unwrap();
        let ax = linspace(-6.0, 6.0, 9);
        let g = wigner_grid(&v, &ax, &ax).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert_eq!(WignerGrid::read_csv(&buf[..]).unwrap(), g);
    }
}
