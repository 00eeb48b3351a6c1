use crate::error::{invalid, require_non_negative, Result};
use crate::phase_space::LambDicke;
use serde::{Deserialize, Serialize};

/// A value with a one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub fn new(value: f64, sigma: f64) -> Self {
        Measured { value, sigma }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedVisibility {
    pub v_st: f64,
    pub sigma: f64,
    /// `V_SQL^{2n̄+1} / V_calib`.
    pub correction_factor: f64,
    /// The reference visibility fell short of its ideal value.
    pub technical_loss: bool,
}

/// `V_st = V_data · V_SQL^{2n̄_calib+1} / V_calib`, relative errors in quadrature.
pub fn calibrate_visibility(data: Measured, calib: Measured, nbar_calib: f64, eta: LambDicke) -> Result<CalibratedVisibility> {
    if !(calib.value > 0.0) {
        return Err(invalid("V_meas_calib", format!("must be positive, got {}", calib.value)));
    }
    require_non_negative("nbar_calib", nbar_calib)?;
    let ideal = eta.sql_visibility().powf(2.0 * nbar_calib + 1.0);
    let factor = ideal / calib.value;
    let v_st = data.value * factor;
    let rel = |m: Measured| if m.value == 0.0 { 0.0 } else { m.sigma / m.value };
    let sigma = v_st.abs() * rel(data).hypot(rel(calib));
    Ok(CalibratedVisibility { v_st, sigma, correction_factor: factor, technical_loss: factor > 1.0 })
}
