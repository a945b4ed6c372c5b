//! CSV and JSON output.

use serde::Serialize;

use crate::dynamics::{ClosedOrbitRecord, DisplacementCertificate, EntropyVerdict};
use crate::mane::ManeEstimate;
use crate::rabinowitz::CriticalPointResult;
use crate::stability::ContactDiagnosis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flat rows for CSV output.
pub trait Tabular {
    fn header() -> Vec<&'static str>;
    fn row(&self) -> Vec<String>;
}

pub(crate) fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else {
        x.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Serializes `records`: a JSON array, or CSV with a header row (header
/// only when `records` is empty).
pub fn emit<T: Serialize + Tabular>(records: &[T], format: Format) -> crate::Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(records).map_err(|e| crate::Error::Degenerate(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| crate::Error::Degenerate(e.to_string());
            w.write_record(T::header()).map_err(io)?;
            for r in records {
                w.write_record(r.row()).map_err(io)?;
            }
            w.into_inner().map_err(|e| crate::Error::Degenerate(e.to_string()))
        }
    }
}

/// A single object as JSON, or a one-row table as CSV.
pub fn emit_one<T: Serialize + Tabular>(record: &T, format: Format) -> crate::Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(record).map_err(|e| crate::Error::Degenerate(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => emit(std::slice::from_ref(record), format),
    }
}

impl Tabular for ClosedOrbitRecord {
    fn header() -> Vec<&'static str> {
        vec!["system", "k", "C", "A", "mu", "T", "l", "omega", "omega_quadrature", "return_error", "contractible", "homotopy_m", "homotopy_l"]
    }
    fn row(&self) -> Vec<String> {
        let (m, l) = self.homotopy.map(|[m, l]| (m.to_string(), l.to_string())).unwrap_or_default();
        vec![
            self.system.name().into(),
            num(self.k),
            num(self.c),
            num(self.a),
            num(self.mu),
            num(self.period),
            self.l.to_string(),
            num(self.omega),
            num(self.omega_quadrature),
            num(self.return_error),
            self.contractible.to_string(),
            m,
            l,
        ]
    }
}

impl Tabular for ManeEstimate {
    fn header() -> Vec<&'static str> {
        vec!["system", "method", "c_lower", "c_upper", "c0_lower", "c0_upper", "unbounded", "witness_k", "witness_radius", "witness_action"]
    }
    fn row(&self) -> Vec<String> {
        let w = self.witness.as_ref();
        vec![
            self.system.name().into(),
            serde_json::to_value(self.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            num(self.c_lower),
            num(self.c_upper),
            opt(self.c0_lower),
            num(self.c0_upper),
            self.unbounded.to_string(),
            opt(w.map(|w| w.k)),
            opt(w.map(|w| w.radius)),
            opt(w.map(|w| w.action)),
        ]
    }
}

impl Tabular for ContactDiagnosis {
    fn header() -> Vec<&'static str> {
        vec!["system", "k", "verdict", "margin", "sampled_min", "orbit_integral_minus", "orbit_integral_plus", "liouville_pairing"]
    }
    fn row(&self) -> Vec<String> {
        vec![
            self.system.name().into(),
            num(self.k),
            serde_json::to_value(self.verdict).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            num(self.margin),
            num(self.sampled_min),
            num(self.orbit_integrals[0]),
            num(self.orbit_integrals[1]),
            num(self.liouville_pairing),
        ]
    }
}

impl Tabular for EntropyVerdict {
    fn header() -> Vec<&'static str> {
        vec!["k", "holds", "min_value", "argmin", "grid_min"]
    }
    fn row(&self) -> Vec<String> {
        vec![num(self.k), self.holds.to_string(), num(self.min_value), num(self.argmin), num(self.grid_min)]
    }
}

impl Tabular for DisplacementCertificate {
    fn header() -> Vec<&'static str> {
        vec!["system", "k", "probe", "exit_time_bound", "simulated_exit_time", "samples", "certified"]
    }
    fn row(&self) -> Vec<String> {
        vec![
            self.system.name().into(),
            num(self.k),
            self.probe.clone(),
            num(self.exit_time_bound),
            num(self.simulated_exit_time),
            self.samples.to_string(),
            self.certified.to_string(),
        ]
    }
}

impl Tabular for CriticalPointResult {
    fn header() -> Vec<&'static str> {
        vec!["system", "k", "points", "eta", "action", "loop_residual", "mean_residual", "iterations", "constant", "matched"]
    }
    fn row(&self) -> Vec<String> {
        vec![
            self.system.name().into(),
            num(self.k),
            self.points.to_string(),
            num(self.eta),
            num(self.action),
            num(self.loop_residual),
            num(self.mean_residual),
            self.iterations.to_string(),
            self.constant.to_string(),
            self.matched.map(|m| m.to_string()).unwrap_or_default(),
        ]
    }
}

/// A table whose columns are fixed at run time.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<serde_json::Value>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<serde_json::Value>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self, format: Format) -> crate::Result<Vec<u8>> {
        match format {
            Format::Json => {
                let objs: Vec<serde_json::Map<String, serde_json::Value>> =
                    self.rows.iter().map(|r| self.header.iter().cloned().zip(r.iter().cloned()).collect()).collect();
                let mut out = serde_json::to_vec_pretty(&objs).map_err(|e| crate::Error::Degenerate(e.to_string()))?;
                out.push(b'\n');
                Ok(out)
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                let io = |e: csv::Error| crate::Error::Degenerate(e.to_string());
                w.write_record(&self.header).map_err(io)?;
                for r in &self.rows {
                    w.write_record(r.iter().map(cell)).map_err(io)?;
                }
                w.into_inner().map_err(|e| crate::Error::Degenerate(e.to_string()))
            }
        }
    }
}

fn cell(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Null => String::new(),
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Number(n) => n.as_f64().map(num).unwrap_or_else(|| n.to_string()),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_csv_is_header_only() {
        let out = emit::<EntropyVerdict>(&[], Format::Csv).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "k,holds,min_value,argmin,grid_min\n");
    }

    #[test]
    fn table_json_and_csv() {
        let mut t = Table::new(&["k", "ok"]);
        t.push(vec![0.25.into(), true.into()]);
        let csv = String::from_utf8(t.to_bytes(Format::Csv).unwrap()).unwrap();
        assert_eq!(csv, "k,ok\n2.500000000000e-1,true\n");
        let json: serde_json::Value = serde_json::from_slice(&t.to_bytes(Format::Json).unwrap()).unwrap();
        assert_eq!(json[0]["ok"], true);
    }
}
