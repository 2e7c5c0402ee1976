//! Mixed-integer linear programs and the encoders that build the
//! synthesis problem: behavioral equality constraints, big-M encoding of
//! the specification, input bounds and a weighted 1-norm cost.

mod encode;
mod lp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::encode::{
    assemble_problem, complete_problem, encode_cost, encode_dynamics, encode_dynamics_as, encode_formula, Atom,
    CostKind, DynamicsVars, FormulaEncoding, ProblemHandles, Zeta,
};
pub use self::lp::{export_lp, write_lp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
    /// Continuous in `[0, 1]`.
    UnitInterval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Amount by which `x` violates the constraint (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Dimensions of the synthesis problem a program was built for.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub t_ini: usize,
    pub horizon: usize,
    pub n_u: usize,
    pub n_y: usize,
}

/// `min objective · x + objective_offset` subject to linear constraints,
/// variable bounds and integrality of binaries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpProblem {
    pub vars: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
    pub objective: Vec<(VarId, f64)>,
    pub objective_offset: f64,
    pub meta: ProblemMeta,
}

impl MilpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lo: f64, hi: f64) -> VarId {
        let (lo, hi) = match kind {
            VarKind::Binary | VarKind::UnitInterval => (lo.max(0.0), hi.min(1.0)),
            VarKind::Continuous => (lo, hi),
        };
        assert!(!lo.is_nan() && !hi.is_nan(), "NaN variable bound");
        self.vars.push(Variable { name: name.into(), kind, lo, hi });
        VarId(self.vars.len() - 1)
    }

    pub fn continuous(&mut self, name: impl Into<String>, lo: f64, hi: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lo, hi)
    }

    pub fn free(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn unit_interval(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::UnitInterval, 0.0, 1.0)
    }

    /// Adds `Σ terms (sense) rhs`, merging repeated variables and dropping
    /// zero coefficients.
    pub fn add_constraint(
        &mut self,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<()> {
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        for (v, a) in terms {
            if v.0 >= self.vars.len() {
                return Err(Error::invalid(format!("constraint references unknown variable {}", v.0)));
            }
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some((_, b)) => *b += a,
                None => merged.push((v, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        if !rhs.is_finite() || merged.iter().any(|(_, a)| !a.is_finite()) {
            return Err(Error::NonFinite("constraint"));
        }
        self.constraints.push(LinearConstraint { terms: merged, sense, rhs });
        Ok(())
    }

    pub fn add_objective(&mut self, v: VarId, coef: f64) {
        match self.objective.iter_mut().find(|(w, _)| *w == v) {
            Some((_, c)) => *c += coef,
            None => self.objective.push((v, coef)),
        }
    }

    pub fn fix(&mut self, v: VarId, value: f64) {
        self.vars[v.0].lo = value;
        self.vars[v.0].hi = value;
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.0]
    }

    pub fn binaries(&self) -> Vec<VarId> {
        (0..self.vars.len()).map(VarId).filter(|&v| self.vars[v.0].kind == VarKind::Binary).collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>()
    }

    /// Largest violation of any constraint or bound by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x));
        let bounds = self.vars.iter().zip(x).map(|(v, &xi)| (v.lo - xi).max(xi - v.hi).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }
}

/// Big-M constant and strictness margin of the predicate encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingParams {
    pub big_m: f64,
    pub eps: f64,
    /// Per-time `(big_m, eps)` replacing the defaults at that time step.
    pub overrides: std::collections::BTreeMap<usize, (f64, f64)>,
    pub dynamics: DynamicsForm,
}

impl Default for EncodingParams {
    fn default() -> Self {
        EncodingParams { big_m: 1e4, eps: 1e-6, overrides: Default::default(), dynamics: DynamicsForm::default() }
    }
}

/// How the data equation `[Hu; Hy] α = w` is written into the program.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsForm {
    /// One row per Hankel row, exactly as stacked.
    Hankel,
    /// The same system premultiplied by `Q^T` from a pivoted QR of
    /// `[Hu; Hy]`: rows within the numerical rank tie `α` to `w`, the rest
    /// constrain `w` alone. Same solution set and row count, far better
    /// conditioned when the data matrix is nearly rank deficient.
    #[default]
    Orthogonal,
}

impl EncodingParams {
    pub fn at(&self, t: usize) -> (f64, f64) {
        self.overrides.get(&t).copied().unwrap_or((self.big_m, self.eps))
    }

    pub fn validate(&self) -> Result<()> {
        let all = std::iter::once((self.big_m, self.eps)).chain(self.overrides.values().copied());
        for (m, e) in all {
            if !(m.is_finite() && e.is_finite() && m > 0.0 && e > 0.0 && e < m) {
                return Err(Error::invalid(format!("encoding needs 0 < eps < big_m, got big_m={m}, eps={e}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
