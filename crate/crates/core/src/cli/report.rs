//! `report.json`: the machine-readable summary of one command.
//!
//! The layout is versioned by [`SCHEMA_VERSION`] and described by
//! `schema/report.schema.json`. Fields that do not apply to a command are
//! `null`, never omitted.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::behavior::PeReport;
use crate::error::Result;
use crate::milp::{CostKind, EncodingParams};
use crate::solver::SolveStats;
use crate::synthesis::{ClosedLoop, ProblemSize, SynthesisResult, SynthesisStatus, Verdict};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub kind: &'static str,
    pub r: Option<Vec<f64>>,
    pub q: Option<Vec<f64>>,
}

impl From<&CostKind> for CostReport {
    fn from(c: &CostKind) -> Self {
        match c {
            CostKind::InputNorm => CostReport { kind: "u-norm", r: None, q: None },
            CostKind::OutputNorm => CostReport { kind: "y-norm", r: None, q: None },
            CostKind::Mixed { r, q } => CostReport { kind: "mixed", r: Some(r.clone()), q: Some(q.clone()) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: &'static str,
    pub scenario: Option<String>,
    pub spec: String,
    pub cost: Option<CostReport>,
    pub status: Option<SynthesisStatus>,
    pub optimal: Option<bool>,
    pub objective: Option<f64>,
    pub horizon: usize,
    pub t_ini: usize,
    pub verdict: Option<&'static str>,
    pub t_fail: Option<usize>,
    /// Largest `|y_pred - y_closed_loop|` over all samples.
    pub max_prediction_error: Option<f64>,
    pub init_residual: Option<f64>,
    pub pe: Option<PeReport>,
    pub pe_certified: Option<bool>,
    pub init_adjustment: Option<f64>,
    pub problem: Option<ProblemSize>,
    pub solver: Option<SolveStats>,
    pub encoding: Option<EncodingParams>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(command: &'static str, spec: &str, horizon: usize, t_ini: usize) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command,
            scenario: None,
            spec: spec.to_string(),
            cost: None,
            status: None,
            optimal: None,
            objective: None,
            horizon,
            t_ini,
            verdict: None,
            t_fail: None,
            max_prediction_error: None,
            init_residual: None,
            pe: None,
            pe_certified: None,
            init_adjustment: None,
            problem: None,
            solver: None,
            encoding: None,
            warnings: Vec::new(),
        }
    }

    pub fn with_synthesis(mut self, res: &SynthesisResult, cost: &CostKind, encoding: &EncodingParams) -> Self {
        self.cost = Some(cost.into());
        self.status = Some(res.status);
        self.optimal = Some(res.optimal);
        self.objective = res.plan.as_ref().map(|p| p.objective);
        self.pe = res.pe.clone();
        self.pe_certified = Some(res.pe_certified);
        self.init_adjustment = Some(res.init_adjustment);
        self.problem = Some(res.size);
        self.solver = Some(res.stats.clone());
        self.encoding = Some(encoding.clone());
        self.warnings.extend(res.warnings.iter().cloned());
        self
    }

    pub fn with_closed_loop(mut self, cl: &ClosedLoop, res: Option<&SynthesisResult>) -> Self {
        match cl.verdict {
            Verdict::Satisfied => self.verdict = Some("Satisfied"),
            Verdict::Violated { t_fail } => {
                self.verdict = Some("Violated");
                self.t_fail = Some(t_fail);
            }
        }
        self.init_residual = Some(cl.init_residual);
        self.max_prediction_error = res.and_then(|r| r.plan.as_ref()).map(|p| p.y_pred.max_abs_diff(&cl.y));
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}
