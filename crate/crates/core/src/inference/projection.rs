//! Projection of squeezed-thermal visibilities to zero temperature.

use super::dataset::{ScanKind, VisibilityDatum};
use super::model::{FitParams, VisibilityModel};
use crate::error::{invalid, Error, Result};
use crate::numeric::TruncatedNormal;
use serde::{Deserialize, Serialize};

/// Model visibilities below this are treated as a node.
pub const NODE_THRESHOLD: f64 = 1e-3;
/// Occupation step for the finite-difference `dγ/dn̄`.
const NBAR_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalProjection {
    pub gamma: f64,
    pub v_proj: f64,
    pub sigma: f64,
}

fn model_point(model: &dyn VisibilityModel, params: &FitParams, scan: ScanKind, t: f64, nbar: f64) -> Result<f64> {
    let v = model.visibility(params, scan, t, TruncatedNormal::point(nbar))?;
    if v.abs() < NODE_THRESHOLD {
        return Err(Error::NodeRegion { time: t, value: v });
    }
    Ok(v)
}

fn gamma(model: &dyn VisibilityModel, params: &FitParams, scan: ScanKind, t: f64, v0: f64, nbar: f64) -> Result<f64> {
    let vn = model_point(model, params, scan, t, nbar)?;
    if vn >= 1.0 || v0 >= 1.0 {
        return Err(Error::NodeRegion { time: t, value: vn });
    }
    Ok(v0.ln() / vn.ln())
}

/// `V_proj = V_st^γ`, `γ(t) = ln V(t; 0) / ln V(t; n̄)`, with the uncertainty
/// of `V_st` and `n̄` propagated to first order.
pub fn thermal_projection(datum: &VisibilityDatum, params: &FitParams, model: &dyn VisibilityModel) -> Result<ThermalProjection> {
    datum.validate()?;
    if !(datum.v_st > 0.0 && datum.v_st <= 1.0) {
        return Err(invalid("V_st", "must lie in (0, 1]"));
    }
    if datum.nbar == 0.0 {
        return Ok(ThermalProjection { gamma: 1.0, v_proj: datum.v_st, sigma: datum.sigma_v });
    }
    let v0 = model_point(model, params, datum.scan_kind, datum.t, 0.0)?;
    let g = gamma(model, params, datum.scan_kind, datum.t, v0, datum.nbar)?;
    let v_proj = datum.v_st.powf(g);
    let dv = g * datum.v_st.powf(g - 1.0) * datum.sigma_v;
    let dg = if datum.sigma_nbar > 0.0 {
        let lo = (datum.nbar - NBAR_STEP).max(0.0);
        let hi = datum.nbar + NBAR_STEP;
        let g_lo = if lo == 0.0 { 1.0 } else { gamma(model, params, datum.scan_kind, datum.t, v0, lo)? };
        let g_hi = gamma(model, params, datum.scan_kind, datum.t, v0, hi)?;
        (g_hi - g_lo) / (hi - lo) * datum.sigma_nbar
    } else {
        0.0
    };
    let dn = v_proj * datum.v_st.ln() * dg;
    Ok(ThermalProjection { gamma: g, v_proj, sigma: dv.hypot(dn) })
}
