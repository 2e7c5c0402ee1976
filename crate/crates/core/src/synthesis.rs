//! End-to-end synthesis from data, closed-loop verification against a known
//! model, and a model-based variant of the same program used as an oracle.

use serde::{Deserialize, Serialize};

use crate::behavior::{self, PeReport};
use crate::error::{Error, Result};
use crate::lti::{InputBox, Signal, StateSpaceModel, Trajectory};
use crate::milp::{
    assemble_problem, complete_problem, CostKind, DynamicsVars, EncodingParams, MilpProblem, ProblemHandles,
    ProblemMeta, Sense, VarId,
};
use crate::numerics::{self, LeastSquares};
use crate::solver::{solve_milp, LpSolution, SolveStats, SolverParams, Status};
use crate::stl::StlFormula;

/// Default tolerance, relative to `1 + ‖y_ini‖`, on the residual of the
/// state fitted to an initialization.
pub const DEFAULT_INIT_TOL: f64 = 1e-6;

/// Largest accepted distance between a given initialization and its
/// projection onto the data span, relative to `1 + ‖w_ini‖`.
pub const DEFAULT_PROJECTION_TOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    /// Number of initialization samples.
    pub t_ini: usize,
    /// Upper bound on the system order, used for the PE certificate.
    pub n_x_bound: usize,
    pub cost: CostKind,
    pub input_box: InputBox,
    pub encoding: EncodingParams,
    pub solver: SolverParams,
    /// Plan over more steps than the formula needs.
    pub horizon: Option<usize>,
    /// See [`DEFAULT_PROJECTION_TOL`].
    pub projection_tol: f64,
}

impl SynthesisConfig {
    /// `t_ini` defaults to the order bound.
    pub fn new(n_x_bound: usize, input_box: InputBox) -> Self {
        SynthesisConfig {
            t_ini: n_x_bound,
            n_x_bound,
            cost: CostKind::InputNorm,
            input_box,
            encoding: EncodingParams::default(),
            solver: SolverParams::default(),
            horizon: None,
            projection_tol: DEFAULT_PROJECTION_TOL,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.t_ini == 0 {
            return Err(Error::invalid("t_ini must be at least 1"));
        }
        if !(self.projection_tol >= 0.0) {
            return Err(Error::invalid("projection tolerance must be nonnegative"));
        }
        self.solver.validate()?;
        self.encoding.validate()
    }

    fn horizon_for(&self, phi: &StlFormula) -> Result<usize> {
        let needed = compute_l(phi);
        match self.horizon {
            Some(h) if h < needed => {
                Err(Error::invalid(format!("horizon {h} is shorter than the formula horizon {needed}")))
            }
            Some(h) => Ok(h),
            None => Ok(needed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SynthesisStatus {
    Feasible,
    /// No input sequence in the box satisfies the specification.
    Infeasible,
    /// A solver limit was reached before any feasible plan was found.
    Unknown,
}

/// A feasible plan over `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub u_opt: Signal,
    pub y_pred: Signal,
    /// Known future disturbance the plan was computed against.
    pub d: Option<Signal>,
    pub objective: f64,
    /// Combination of data columns; the initial state for the model-based path.
    pub alpha: Vec<f64>,
    /// Whether the predicted outputs satisfy the formula under the monitor.
    pub prediction_satisfies: bool,
    /// Predicates whose magnitude reached big-M on the prediction.
    pub big_m_saturated: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSize {
    pub variables: usize,
    pub constraints: usize,
    pub binaries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub status: SynthesisStatus,
    /// False when a limit stopped the search with an unproven incumbent.
    pub optimal: bool,
    /// `L`; plans have `L + 1` samples.
    pub horizon: usize,
    pub plan: Option<Plan>,
    /// The initialization the program was built on.
    pub w_ini: Trajectory,
    /// Distance moved by projecting the given initialization onto the data.
    pub init_adjustment: f64,
    pub pe: Option<PeReport>,
    pub pe_certified: bool,
    pub stats: SolveStats,
    pub size: ProblemSize,
    pub warnings: Vec<String>,
}

impl SynthesisResult {
    pub fn is_feasible(&self) -> bool {
        self.status == SynthesisStatus::Feasible
    }
}

/// `L = ‖φ‖`, the smallest `L` with `L + 1 > ‖φ‖`.
pub fn compute_l(phi: &StlFormula) -> usize {
    phi.horizon()
}

/// Synthesizes inputs for a system without disturbance channels.
pub fn synthesize(
    data: &Trajectory,
    w_ini: &Trajectory,
    phi: &StlFormula,
    cfg: &SynthesisConfig,
) -> Result<SynthesisResult> {
    synthesize_with_disturbance(data, w_ini, None, phi, cfg)
}

/// Synthesizes `u_{[0,L]}` from data alone.
///
/// The dictionary has depth `t_ini + L + 1`. `d_future` gives the known
/// disturbance over `[0, L]` when the data has disturbance channels. The
/// initialization is projected onto the data span first so that recorded,
/// rounded values are accepted; the distance moved is reported and must
/// stay below `cfg.projection_tol · (1 + ‖w_ini‖)`.
pub fn synthesize_with_disturbance(
    data: &Trajectory,
    w_ini: &Trajectory,
    d_future: Option<&Signal>,
    phi: &StlFormula,
    cfg: &SynthesisConfig,
) -> Result<SynthesisResult> {
    let prepared = prepare(data, w_ini, d_future, phi, cfg)?;
    let sol = solve_milp(&prepared.problem, &cfg.solver);
    let Prepared { problem, handles, horizon, w_ini, init_adjustment, pe, pe_certified, warnings } = prepared;
    let mut result = finish(&problem, &handles, sol, phi, d_future, cfg, horizon, w_ini, warnings)?;
    result.init_adjustment = init_adjustment;
    result.pe = pe;
    result.pe_certified = pe_certified;
    Ok(result)
}

/// The assembled program of a data-driven synthesis, before solving.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub problem: MilpProblem,
    pub handles: ProblemHandles,
    pub horizon: usize,
    /// Initialization after projection onto the data span.
    pub w_ini: Trajectory,
    pub init_adjustment: f64,
    pub pe: Option<PeReport>,
    pub pe_certified: bool,
    pub warnings: Vec<String>,
}

/// Validates the inputs and builds the program that
/// [`synthesize_with_disturbance`] solves.
pub fn prepare(
    data: &Trajectory,
    w_ini: &Trajectory,
    d_future: Option<&Signal>,
    phi: &StlFormula,
    cfg: &SynthesisConfig,
) -> Result<Prepared> {
    cfg.validate()?;
    if w_ini.len() != cfg.t_ini {
        return Err(Error::dim(format!("initialization has {} samples, t_ini is {}", w_ini.len(), cfg.t_ini)));
    }
    if phi.output_dim() > data.n_y() {
        return Err(Error::dim(format!("formula reads y{}, data has {} outputs", phi.output_dim(), data.n_y())));
    }
    let horizon = cfg.horizon_for(phi)?;
    let sys = behavior::assemble(data, cfg.t_ini, horizon, Some(cfg.n_x_bound))?;
    let mut warnings = Vec::new();
    if sys.pe_order_certified.is_none() {
        let why = sys.pe.as_ref().and_then(|r| r.reason.clone()).unwrap_or_default();
        let msg = format!(
            "input data is not persistently exciting of order {} ({why}); a reported infeasibility is not conclusive",
            sys.depth + cfg.n_x_bound
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let (projected, moved) = behavior::project_initialization(&sys, w_ini)?;
    let scale = 1.0 + numerics::norm2(&behavior::stack_window(w_ini));
    if moved > cfg.projection_tol * scale {
        return Err(Error::InconsistentInitialization { residual: moved });
    }
    if moved > 1e-9 * scale {
        log::info!("initialization moved by {moved:.3e} onto the data span");
    }

    let (problem, handles) =
        assemble_problem(&sys, &projected, phi, &cfg.cost, &cfg.input_box, d_future, &cfg.encoding)?;
    log::info!(
        "program: {} variables ({} binary), {} constraints",
        problem.n_vars(),
        problem.binaries().len(),
        problem.constraints.len()
    );
    Ok(Prepared {
        problem,
        handles,
        horizon,
        w_ini: projected,
        init_adjustment: moved,
        pe_certified: sys.pe_order_certified.is_some(),
        pe: sys.pe,
        warnings,
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    prob: &MilpProblem,
    handles: &ProblemHandles,
    sol: LpSolution,
    phi: &StlFormula,
    d_future: Option<&Signal>,
    cfg: &SynthesisConfig,
    horizon: usize,
    w_ini: Trajectory,
    mut warnings: Vec<String>,
) -> Result<SynthesisResult> {
    let size =
        ProblemSize { variables: prob.n_vars(), constraints: prob.constraints.len(), binaries: prob.binaries().len() };
    let (status, optimal) = match (sol.status, sol.values.is_empty()) {
        (Status::Optimal, _) => (SynthesisStatus::Feasible, true),
        (Status::Infeasible, _) => (SynthesisStatus::Infeasible, true),
        (Status::NotProven, false) => (SynthesisStatus::Feasible, false),
        (Status::NotProven, true) => (SynthesisStatus::Unknown, false),
        (Status::Unbounded, _) => return Err(Error::Numerical("synthesis program reported unbounded".into())),
    };
    if let Some(why) = &sol.stats.limit {
        warnings.push(format!("solver stopped early: {why}"));
    }
    let plan = if status == SynthesisStatus::Feasible {
        let read = |rows: &[Vec<VarId>], dim: usize| -> Result<Signal> {
            Signal::new(dim, rows.iter().flatten().map(|v| sol.value(*v)).collect())
        };
        let u_opt = read(&handles.dynamics.u, prob.meta.n_u)?;
        let y_pred = read(&handles.dynamics.y, prob.meta.n_y)?;
        let prediction_satisfies = phi.monitor(&y_pred, 0);
        if !prediction_satisfies {
            warnings.push("predicted outputs do not satisfy the formula under the monitor".into());
        }
        let big_m_saturated = handles.formula.big_m_violations(&y_pred, &cfg.encoding).len();
        if big_m_saturated > 0 {
            warnings.push(format!("{big_m_saturated} predicate values reach big-M; consider a larger M"));
        }
        Some(Plan {
            u_opt,
            y_pred,
            d: d_future.cloned(),
            objective: sol.objective,
            alpha: handles.dynamics.alpha.iter().map(|v| sol.value(*v)).collect(),
            prediction_satisfies,
            big_m_saturated,
        })
    } else {
        None
    };
    Ok(SynthesisResult {
        status,
        optimal,
        horizon,
        plan,
        w_ini,
        init_adjustment: 0.0,
        pe: None,
        pe_certified: false,
        stats: sol.stats,
        size,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    Satisfied,
    /// `t_fail` is the earliest failing obligation.
    Violated {
        t_fail: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub verdict: Verdict,
    /// Simulated outputs over `[0, L]`.
    pub y: Signal,
    /// State fitted to the start of the initialization window.
    pub x_ini: Vec<f64>,
    pub init_residual: f64,
}

/// Fits a state to `w_ini` under `model`, returning the state at the start
/// of the window and the residual.
fn fit_initial_state(model: &StateSpaceModel, w_ini: &Trajectory) -> Result<(Vec<f64>, f64)> {
    let p = w_ini.len();
    let (obs, gu, gd) = model.response_matrices(p);
    let mut rhs = w_ini.y.as_slice().to_vec();
    let forced = gu.mul_vec(w_ini.u.as_slice())?;
    for (r, f) in rhs.iter_mut().zip(forced.iter()) {
        *r -= f;
    }
    if let (Some(gd), Some(d)) = (gd, w_ini.d.as_ref()) {
        for (r, f) in rhs.iter_mut().zip(gd.mul_vec(d.as_slice())?.iter()) {
            *r -= f;
        }
    }
    let ls = numerics::solve_least_squares(&obs, &rhs, f64::INFINITY)?;
    let residual = ls.residual();
    let x = match ls {
        LeastSquares::Solved { x, .. } | LeastSquares::Infeasible { x, .. } => x.into_inner(),
    };
    Ok((x, residual))
}

/// Applies `u_opt` to the true system from the state consistent with
/// `w_ini` and monitors the result at `t = 0`.
///
/// The state is the least-squares fit to the initialization; a residual
/// above `init_tol · (1 + ‖y_ini‖)` means the initialization is not a
/// trajectory of `model` and is reported as an error.
pub fn verify_closed_loop(
    model: &StateSpaceModel,
    w_ini: &Trajectory,
    u_opt: &Signal,
    d_future: Option<&Signal>,
    phi: &StlFormula,
    init_tol: f64,
) -> Result<ClosedLoop> {
    if w_ini.n_u() != model.n_u() || w_ini.n_y() != model.n_y() || w_ini.n_d() != model.n_d() {
        return Err(Error::dim("initialization channels do not match the model"));
    }
    if u_opt.dim() != model.n_u() {
        return Err(Error::dim(format!("inputs have {} channels, model has {}", u_opt.dim(), model.n_u())));
    }
    if u_opt.is_empty() {
        return Err(Error::invalid("empty input sequence"));
    }
    let (x_ini, init_residual) = fit_initial_state(model, w_ini)?;
    if init_residual > init_tol * (1.0 + numerics::norm2(w_ini.y.as_slice())) {
        return Err(Error::InconsistentInitialization { residual: init_residual });
    }
    let (_, x0) = model.simulate_from(&x_ini, &w_ini.u, w_ini.d.as_ref())?;
    let d = match (model.n_d(), d_future) {
        (0, _) => None,
        (_, Some(d)) if d.len() >= u_opt.len() => Some(d.slice(0, u_opt.len())),
        (_, Some(d)) => return Err(Error::InsufficientData { needed: u_opt.len(), got: d.len() }),
        (_, None) => return Err(Error::invalid("the model has a disturbance channel: a future schedule is required")),
    };
    let (traj, _) = model.simulate_from(&x0, u_opt, d.as_ref())?;
    let verdict = match phi.first_violation(&traj.y) {
        None => Verdict::Satisfied,
        Some(t_fail) => Verdict::Violated { t_fail },
    };
    Ok(ClosedLoop { verdict, y: traj.y, x_ini, init_residual })
}

/// The same program as [`synthesize_with_disturbance`] with the data
/// dictionary replaced by the model's own recursion from a free initial
/// state pinned by `w_ini`. Used to cross-check completeness.
pub fn model_based_synthesize(
    model: &StateSpaceModel,
    w_ini: &Trajectory,
    d_future: Option<&Signal>,
    phi: &StlFormula,
    cfg: &SynthesisConfig,
) -> Result<SynthesisResult> {
    cfg.validate()?;
    let p = w_ini.len();
    if p != cfg.t_ini {
        return Err(Error::dim(format!("initialization has {p} samples, t_ini is {}", cfg.t_ini)));
    }
    if w_ini.n_u() != model.n_u() || w_ini.n_y() != model.n_y() || w_ini.n_d() != model.n_d() {
        return Err(Error::dim("initialization channels do not match the model"));
    }
    let horizon = cfg.horizon_for(phi)?;
    let n = p + horizon + 1;
    let (n_x, n_u, n_y, n_d) = (model.n_x(), model.n_u(), model.n_y(), model.n_d());
    let d_all = match (n_d, d_future) {
        (0, _) => None,
        (_, Some(d)) if d.len() == horizon + 1 && d.dim() == n_d => Some(w_ini.d.as_ref().expect("checked").concat(d)?),
        (_, Some(d)) => {
            return Err(Error::dim(format!(
                "future disturbance is {}x{}, expected {}x{n_d}",
                d.len(),
                d.dim(),
                horizon + 1
            )))
        }
        (_, None) => return Err(Error::invalid("the model has a disturbance channel: a future schedule is required")),
    };
    let (obs, gu, gd) = model.response_matrices(n);

    let mut prob = MilpProblem::new();
    let x0: Vec<VarId> = (0..n_x).map(|j| prob.free(format!("x0_{j}"))).collect();
    let u: Vec<Vec<VarId>> =
        (0..=horizon).map(|t| (0..n_u).map(|c| prob.free(format!("u{}_{t}", c + 1))).collect()).collect();
    let y: Vec<Vec<VarId>> =
        (0..=horizon).map(|t| (0..n_y).map(|c| prob.free(format!("y{}_{t}", c + 1))).collect()).collect();
    // Known forcing: initialization inputs and all disturbances.
    let known = |r: usize| -> f64 {
        let mut k: f64 = (0..p * n_u).map(|j| gu.get(r, j) * w_ini.u.as_slice()[j]).sum();
        if let (Some(gd), Some(d)) = (&gd, &d_all) {
            k += (0..n * n_d).map(|j| gd.get(r, j) * d.as_slice()[j]).sum::<f64>();
        }
        k
    };
    for t in 0..n {
        for i in 0..n_y {
            let r = t * n_y + i;
            let mut terms: Vec<(VarId, f64)> = x0.iter().enumerate().map(|(j, &v)| (v, obs.get(r, j))).collect();
            for s in p..=t {
                for c in 0..n_u {
                    terms.push((u[s - p][c], gu.get(r, s * n_u + c)));
                }
            }
            if t < p {
                prob.add_constraint(terms, Sense::Eq, w_ini.y.sample(t)[i] - known(r))?;
            } else {
                terms.push((y[t - p][i], -1.0));
                prob.add_constraint(terms, Sense::Eq, -known(r))?;
            }
        }
    }
    prob.meta = ProblemMeta { t_ini: p, horizon, n_u, n_y };
    let dynamics = DynamicsVars { alpha: x0, u, y };
    let handles = complete_problem(&mut prob, dynamics, phi, &cfg.cost, &cfg.input_box, &cfg.encoding)?;
    let sol = solve_milp(&prob, &cfg.solver);
    finish(&prob, &handles, sol, phi, d_future, cfg, horizon, w_ini.clone(), Vec::new())
}

#[cfg(test)]
mod tests;
