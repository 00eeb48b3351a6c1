use crate::error::{invalid, Error, Result};
use crate::units::{s_to_us, us_to_s};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Which duration a scan varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    /// Shallow-trap duration `ΔT` varied, deep-trap duration fixed.
    ShallowScan,
    /// Deep-trap duration `Δt` varied, shallow-trap duration fixed.
    DeepScan,
}

impl ScanKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScanKind::ShallowScan => "shallow_scan",
            ScanKind::DeepScan => "deep_scan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityDatum {
    /// Nominal value of the scanned duration, seconds.
    pub t: f64,
    pub v_st: f64,
    pub sigma_v: f64,
    pub nbar: f64,
    pub sigma_nbar: f64,
    pub scan_kind: ScanKind,
}

impl VisibilityDatum {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_v > 0.0 && self.sigma_v.is_finite()) {
            return Err(invalid("sigma_V", format!("must be positive, got {}", self.sigma_v)));
        }
        if !(self.nbar >= 0.0 && self.sigma_nbar >= 0.0) {
            return Err(invalid("nbar", "occupation and its uncertainty must be non-negative"));
        }
        if !(self.t.is_finite() && self.v_st.is_finite()) {
            return Err(invalid("t", "non-finite value"));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    t_us: f64,
    #[serde(rename = "V_st")]
    v_st: f64,
    #[serde(rename = "sigma_V")]
    sigma_v: f64,
    nbar: f64,
    sigma_nbar: f64,
    scan_kind: ScanKind,
}

/// Read CSV with header `t_us,V_st,sigma_V,nbar,sigma_nbar,scan_kind`.
pub fn read_dataset<R: Read>(input: R) -> Result<Vec<VisibilityDatum>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let want = ["t_us", "V_st", "sigma_V", "nbar", "sigma_nbar", "scan_kind"];
    if header != want {
        return Err(Error::Parse { line: 1, reason: format!("expected header {}", want.join(",")) });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Parse { line: i + 2, reason: e.to_string() })?;
        let d = VisibilityDatum {
            t: us_to_s(row.t_us),
            v_st: row.v_st,
            sigma_v: row.sigma_v,
            nbar: row.nbar,
            sigma_nbar: row.sigma_nbar,
            scan_kind: row.scan_kind,
        };
        d.validate().map_err(|e| Error::Parse { line: i + 2, reason: e.to_string() })?;
        out.push(d);
    }
    Ok(out)
}

pub fn write_dataset<W: Write>(data: &[VisibilityDatum], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_us", "V_st", "sigma_V", "nbar", "sigma_nbar", "scan_kind"])?;
    for d in data {
        w.write_record([
            format!("{:.6}", s_to_us(d.t)),
            format!("{:.10}", d.v_st),
            format!("{:.10}", d.sigma_v),
            format!("{:.10}", d.nbar),
            format!("{:.10}", d.sigma_nbar),
            d.scan_kind.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
