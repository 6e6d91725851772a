//! Time-indexed simulation traces and their CSV representation.
//!
//! Values are printed with Rust's shortest round-trip float formatting, so a
//! written trace parses back bit-identically. Faults are appended as a
//! trailing comment block prefixed with `#`.

use thiserror::Error;

use crate::fault::{Fault, FaultKind};

/// One recorded instant of the closed loop, all vectors indexed by output.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub v_d: Vec<f64>,
    pub e_v: Vec<f64>,
    pub u: Vec<f64>,
    pub phi_lower: Vec<f64>,
    pub phi_upper: Vec<f64>,
    pub rho_lower: Vec<f64>,
    pub rho_upper: Vec<f64>,
    pub soft_lower: Vec<f64>,
    pub soft_upper: Vec<f64>,
    pub hard_lower: Vec<f64>,
    pub hard_upper: Vec<f64>,
}

/// Per-output column groups, in file order.
const COLUMN_GROUPS: [&str; 13] = [
    "x", "v", "vd", "ev", "u", "phiL", "phiU", "rhoL", "rhoU", "softL", "softU", "hardL", "hardU",
];

/// A complete simulation record: rows at strictly increasing times plus any
/// faults that aborted the run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub n_outputs: usize,
    pub rows: Vec<TraceRow>,
    pub faults: Vec<Fault>,
}

impl SimTrace {
    pub fn new(n_outputs: usize) -> Self {
        SimTrace { n_outputs, rows: Vec::new(), faults: Vec::new() }
    }

    pub fn is_fault_free(&self) -> bool {
        self.faults.is_empty()
    }

    /// Serialize to the trace CSV format.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push('t');
        for group in COLUMN_GROUPS {
            for i in 1..=self.n_outputs {
                out.push_str(&format!(",{group}_{i}"));
            }
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{}", row.t));
            for field in [
                &row.x,
                &row.v,
                &row.v_d,
                &row.e_v,
                &row.u,
                &row.phi_lower,
                &row.phi_upper,
                &row.rho_lower,
                &row.rho_upper,
                &row.soft_lower,
                &row.soft_upper,
                &row.hard_lower,
                &row.hard_upper,
            ] {
                for value in field.iter() {
                    out.push_str(&format!(",{value}"));
                }
            }
            out.push('\n');
        }
        for fault in &self.faults {
            out.push_str(&format!(
                "# fault t={} output={} kind={} value={}\n",
                fault.t,
                fault.index,
                fault.kind.code(),
                fault_value(&fault.kind),
            ));
        }
        out
    }

    /// Parse a trace written by [`to_csv_string`](Self::to_csv_string).
    pub fn from_csv_str(text: &str) -> Result<SimTrace, TraceParseError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(TraceParseError::Empty)?;
        let columns: Vec<&str> = header.split(',').collect();
        if columns.first() != Some(&"t") {
            return Err(TraceParseError::BadHeader(header.to_string()));
        }
        let total = columns.len() - 1;
        if total == 0 || total % COLUMN_GROUPS.len() != 0 {
            return Err(TraceParseError::BadHeader(header.to_string()));
        }
        let n = total / COLUMN_GROUPS.len();
        // spot-check the expected layout
        for (g, group) in COLUMN_GROUPS.iter().enumerate() {
            for i in 0..n {
                let want = format!("{group}_{}", i + 1);
                let got = columns[1 + g * n + i];
                if got != want {
                    return Err(TraceParseError::BadHeader(format!(
                        "expected column {want}, found {got}"
                    )));
                }
            }
        }

        let mut trace = SimTrace::new(n);
        for line in lines {
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                trace.faults.push(parse_fault_line(rest)?);
                continue;
            }
            let values: Vec<f64> = line
                .split(',')
                .map(|s| s.parse().map_err(|_| TraceParseError::BadNumber(s.to_string())))
                .collect::<Result<_, _>>()?;
            if values.len() != 1 + total {
                return Err(TraceParseError::BadRow(line.to_string()));
            }
            let take = |g: usize| values[1 + g * n..1 + (g + 1) * n].to_vec();
            trace.rows.push(TraceRow {
                t: values[0],
                x: take(0),
                v: take(1),
                v_d: take(2),
                e_v: take(3),
                u: take(4),
                phi_lower: take(5),
                phi_upper: take(6),
                rho_lower: take(7),
                rho_upper: take(8),
                soft_lower: take(9),
                soft_upper: take(10),
                hard_lower: take(11),
                hard_upper: take(12),
            });
        }
        Ok(trace)
    }
}

fn fault_value(kind: &FaultKind) -> f64 {
    match kind {
        FaultKind::PlannerInfeasible { value } => *value,
        FaultKind::FunnelViolation { xhat } => *xhat,
        FaultKind::VelocityFunnelViolation { evhat } => *evhat,
        FaultKind::TransformDomain { z } => *z,
        FaultKind::NonFinite { .. } => f64::NAN,
    }
}

fn parse_fault_line(rest: &str) -> Result<Fault, TraceParseError> {
    let mut t = None;
    let mut index = None;
    let mut kind = None;
    let mut value = f64::NAN;
    for token in rest.split_whitespace() {
        if let Some((key, val)) = token.split_once('=') {
            match key {
                "t" => t = val.parse().ok(),
                "output" => index = val.parse().ok(),
                "kind" => kind = Some(val.to_string()),
                "value" => value = val.parse().unwrap_or(f64::NAN),
                _ => {}
            }
        }
    }
    let (t, index, kind) = match (t, index, kind) {
        (Some(t), Some(index), Some(kind)) => (t, index, kind),
        _ => return Err(TraceParseError::BadFault(rest.to_string())),
    };
    let kind = match kind.as_str() {
        "planner_infeasible" => FaultKind::PlannerInfeasible { value },
        "funnel_violation" => FaultKind::FunnelViolation { xhat: value },
        "velocity_funnel_violation" => FaultKind::VelocityFunnelViolation { evhat: value },
        "transform_domain" => FaultKind::TransformDomain { z: value },
        "non_finite" => FaultKind::NonFinite { quantity: "recorded" },
        _ => return Err(TraceParseError::BadFault(rest.to_string())),
    };
    Ok(Fault { t, index, kind })
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("trace file is empty")]
    Empty,
    #[error("malformed trace header: {0}")]
    BadHeader(String),
    #[error("malformed trace row: {0}")]
    BadRow(String),
    #[error("unparseable number: {0}")]
    BadNumber(String),
    #[error("malformed fault line: {0}")]
    BadFault(String),
}
