//! LP and MILP solver: bounded primal simplex plus best-first
//! branch-and-bound over the binary variables.

mod simplex;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::milp::{MilpProblem, VarId, VarKind};

pub use self::simplex::{Basis, LpOutcome, Simplex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Largest accepted constraint or bound violation.
    pub feastol: f64,
    /// Largest accepted distance of a binary from {0, 1}.
    pub inttol: f64,
    pub node_limit: usize,
    /// Wall-clock limit in seconds.
    pub time_limit: f64,
    /// Simplex iterations per LP.
    pub iteration_limit: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams { feastol: 1e-7, inttol: 1e-6, node_limit: 200_000, time_limit: 300.0, iteration_limit: 100_000 }
    }
}

impl SolverParams {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.feastol > 0.0
            && self.inttol > 0.0
            && self.inttol < 0.5
            && self.time_limit > 0.0
            && self.node_limit > 0
            && self.iteration_limit > 0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::InvalidArgument(format!(
                "solver parameters must be positive (and inttol < 0.5): {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// A limit was hit; `values` holds the best solution found, if any.
    NotProven,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    pub elapsed_secs: f64,
    /// Incumbent objective values in the order they were found.
    pub incumbents: Vec<f64>,
    pub limit: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: Status,
    /// One value per problem variable; empty when no point is available.
    pub values: Vec<f64>,
    pub objective: f64,
    /// Row duals `y` with `c - Aᵀy` the reduced costs (LP solves only).
    pub duals: Vec<f64>,
    pub stats: SolveStats,
}

impl LpSolution {
    fn empty(status: Status, stats: SolveStats) -> Self {
        let objective = match status {
            Status::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        LpSolution { status, values: Vec::new(), objective, duals: Vec::new(), stats }
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}

fn has_nonfinite(prob: &MilpProblem) -> bool {
    prob.constraints.iter().any(|c| !c.rhs.is_finite() || c.terms.iter().any(|(_, a)| !a.is_finite()))
        || prob.objective.iter().any(|(_, c)| !c.is_finite())
        || prob
            .vars
            .iter()
            .any(|v| v.lo.is_nan() || v.hi.is_nan() || v.lo == f64::INFINITY || v.hi == f64::NEG_INFINITY)
}

fn empty_bounds(prob: &MilpProblem) -> bool {
    prob.vars.iter().any(|v| v.lo > v.hi)
}

/// Solves the LP relaxation (integrality ignored).
pub fn solve_lp(prob: &MilpProblem, params: &SolverParams) -> LpSolution {
    let start = Instant::now();
    let mut stats = SolveStats::default();
    if has_nonfinite(prob) {
        stats.limit = Some("non-finite problem data".into());
        return LpSolution::empty(Status::NotProven, stats);
    }
    if empty_bounds(prob) {
        return LpSolution::empty(Status::Infeasible, stats);
    }
    let mut lp = Simplex::new(prob, params.feastol);
    let outcome = lp.solve(params.iteration_limit);
    stats.lp_iterations = lp.iterations;
    stats.elapsed_secs = start.elapsed().as_secs_f64();
    finish_lp(prob, &lp, outcome, params, stats)
}

fn finish_lp(
    prob: &MilpProblem,
    lp: &Simplex,
    outcome: LpOutcome,
    params: &SolverParams,
    mut stats: SolveStats,
) -> LpSolution {
    match outcome {
        LpOutcome::Infeasible => LpSolution::empty(Status::Infeasible, stats),
        LpOutcome::Unbounded => LpSolution::empty(Status::Unbounded, stats),
        LpOutcome::IterationLimit => {
            stats.limit = Some("simplex iteration limit".into());
            LpSolution::empty(Status::NotProven, stats)
        }
        LpOutcome::NumericalTrouble => {
            stats.limit = Some("simplex could not verify optimality (numerical difficulty)".into());
            LpSolution::empty(Status::NotProven, stats)
        }
        LpOutcome::Optimal => {
            let values = lp.values().to_vec();
            let violation = prob.max_violation(&values);
            let status = if violation <= params.feastol {
                Status::Optimal
            } else {
                stats.limit = Some(format!("numerical difficulty: final violation {violation:.3e}"));
                Status::NotProven
            };
            LpSolution { status, objective: prob.objective_value(&values), values, duals: lp.duals(), stats }
        }
    }
}

struct Node {
    bound: f64,
    seq: usize,
    fixings: Vec<(VarId, bool)>,
    basis: Option<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Reversed so that `BinaryHeap` pops the smallest (bound, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

fn fractionality(v: f64) -> f64 {
    (v - v.round()).abs()
}

/// Best-first branch-and-bound on the most fractional binary.
///
/// Ties in fractionality go to the lowest variable index, and open nodes
/// are ordered by `(bound, creation order)`, so results are deterministic
/// unless the time limit is hit. Whenever a relaxation is integral within
/// `inttol`, the binaries are rounded, fixed and the LP re-solved, so a
/// returned solution has exactly integral binaries.
pub fn solve_milp(prob: &MilpProblem, params: &SolverParams) -> LpSolution {
    let start = Instant::now();
    let mut stats = SolveStats::default();
    if has_nonfinite(prob) {
        stats.limit = Some("non-finite problem data".into());
        return LpSolution::empty(Status::NotProven, stats);
    }
    let binaries: Vec<VarId> = prob.binaries();
    if binaries.is_empty() {
        let mut sol = solve_lp(prob, params);
        sol.stats.nodes = 1;
        return sol;
    }
    let mut root_prob = prob.clone();
    for &b in &binaries {
        let v = &mut root_prob.vars[b.0];
        v.lo = v.lo.max(0.0).ceil();
        v.hi = v.hi.min(1.0).floor();
    }
    if empty_bounds(&root_prob) {
        return LpSolution::empty(Status::Infeasible, stats);
    }
    let base: Vec<(f64, f64)> = binaries.iter().map(|b| (root_prob.vars[b.0].lo, root_prob.vars[b.0].hi)).collect();
    let mut lp = Simplex::new(&root_prob, params.feastol);

    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node { bound: f64::NEG_INFINITY, seq, fixings: Vec::new(), basis: None });
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let gap = |inc: f64| 1e-9 * inc.abs().max(1.0);

    let apply = |lp: &mut Simplex, fixings: &[(VarId, bool)]| -> bool {
        for (k, b) in binaries.iter().enumerate() {
            lp.set_bounds(b.0, base[k].0, base[k].1);
        }
        for &(v, one) in fixings {
            let val = if one { 1.0 } else { 0.0 };
            let k = binaries.binary_search(&v).expect("fixings only name binaries");
            if val < base[k].0 || val > base[k].1 {
                return false;
            }
            lp.set_bounds(v.0, val, val);
        }
        true
    };

    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if node.bound >= inc - gap(*inc) {
                break;
            }
        }
        if stats.nodes >= params.node_limit {
            stats.limit = Some(format!("node limit {} reached", params.node_limit));
            break;
        }
        if start.elapsed().as_secs_f64() > params.time_limit {
            stats.limit = Some(format!("time limit {}s reached", params.time_limit));
            break;
        }
        stats.nodes += 1;
        if !apply(&mut lp, &node.fixings) {
            continue;
        }
        if let Some(b) = &node.basis {
            lp.set_basis(b);
        }
        match lp.solve(params.iteration_limit.saturating_add(lp.iterations)) {
            LpOutcome::Optimal => {}
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => {
                if node.fixings.is_empty() {
                    stats.lp_iterations = lp.iterations;
                    stats.elapsed_secs = start.elapsed().as_secs_f64();
                    return LpSolution::empty(Status::Unbounded, stats);
                }
                continue;
            }
            LpOutcome::IterationLimit => {
                stats.limit = Some("simplex iteration limit".into());
                continue;
            }
            LpOutcome::NumericalTrouble => {
                stats.limit = Some("simplex could not verify optimality (numerical difficulty)".into());
                continue;
            }
        }
        let obj = prob.objective_offset + lp.objective();
        if let Some((inc, _)) = &incumbent {
            if obj >= inc - gap(*inc) {
                continue;
            }
        }
        let x = lp.values().to_vec();
        let basis = lp.basis();
        let fixed: std::collections::HashSet<VarId> = node.fixings.iter().map(|f| f.0).collect();

        let most_fractional = |x: &[f64], min_frac: f64| -> Option<VarId> {
            let mut best: Option<(VarId, f64)> = None;
            for &b in &binaries {
                if fixed.contains(&b) {
                    continue;
                }
                let f = fractionality(x[b.0]);
                if f > min_frac && best.map_or(true, |(_, bf)| f > bf) {
                    best = Some((b, f));
                }
            }
            best.map(|(b, _)| b)
        };

        let branch_var = match most_fractional(&x, params.inttol) {
            Some(b) => Some(b),
            None => {
                // Integral within tolerance: fix the rounded binaries and re-solve.
                let mut fixings = node.fixings.clone();
                for &b in &binaries {
                    if !fixed.contains(&b) {
                        fixings.push((b, x[b.0] > 0.5));
                    }
                }
                let accepted = apply(&mut lp, &fixings)
                    && lp.solve(params.iteration_limit.saturating_add(lp.iterations)) == LpOutcome::Optimal;
                let mut exact = lp.values().to_vec();
                // Fixed binaries sit exactly on their bound.
                for &(b, one) in &fixings {
                    exact[b.0] = if one { 1.0 } else { 0.0 };
                }
                if accepted && prob.max_violation(&exact) <= params.feastol {
                    let val = prob.objective_value(&exact);
                    if incumbent.as_ref().map_or(true, |(inc, _)| val < *inc) {
                        stats.incumbents.push(val);
                        incumbent = Some((val, exact));
                    }
                    None
                } else {
                    // Rounding broke feasibility: keep branching on the
                    // least integral free binary.
                    most_fractional(&x, -1.0)
                }
            }
        };
        if let Some(b) = branch_var {
            for one in [false, true] {
                seq += 1;
                let mut fixings = node.fixings.clone();
                fixings.push((b, one));
                heap.push(Node { bound: obj, seq, fixings, basis: Some(basis.clone()) });
            }
        }
    }

    stats.lp_iterations = lp.iterations;
    stats.elapsed_secs = start.elapsed().as_secs_f64();
    let proven = stats.limit.is_none();
    match incumbent {
        Some((obj, values)) => LpSolution {
            status: if proven { Status::Optimal } else { Status::NotProven },
            values,
            objective: obj,
            duals: Vec::new(),
            stats,
        },
        None => LpSolution::empty(if proven { Status::Infeasible } else { Status::NotProven }, stats),
    }
}

/// True when every binary of `prob` is within `tol` of 0 or 1 in `values`.
pub fn is_integral(prob: &MilpProblem, values: &[f64], tol: f64) -> bool {
    prob.vars.iter().zip(values).all(|(var, &x)| var.kind != VarKind::Binary || fractionality(x) <= tol)
}
