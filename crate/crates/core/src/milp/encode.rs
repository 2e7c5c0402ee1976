use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::behavior::HankelSystem;
use crate::error::{Error, Result};
use crate::lti::{InputBox, Signal, Trajectory};
use crate::stl::{Predicate, StlFormula};

use super::{DynamicsForm, EncodingParams, MilpProblem, ProblemMeta, Sense, VarId};
use crate::numerics::{self, ColPivQr};

/// Handles to the trajectory variables of a synthesis problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsVars {
    pub alpha: Vec<VarId>,
    /// `u[t][channel]`, manipulated inputs only.
    pub u: Vec<Vec<VarId>>,
    /// `y[t][channel]`.
    pub y: Vec<Vec<VarId>>,
}

/// Adds `[Hu; Hy] α = (u_ini, u, y_ini, y)`, one row per Hankel row.
///
/// Initialization samples and future disturbances are constants on the
/// right-hand side; only `α`, the future inputs and the future outputs are
/// variables.
pub fn encode_dynamics(
    prob: &mut MilpProblem,
    sys: &HankelSystem,
    w_ini: &Trajectory,
    horizon: usize,
    d_future: Option<&Signal>,
) -> Result<DynamicsVars> {
    encode_dynamics_as(prob, sys, w_ini, horizon, d_future, DynamicsForm::Hankel)
}

/// [`encode_dynamics`] in a chosen row form.
pub fn encode_dynamics_as(
    prob: &mut MilpProblem,
    sys: &HankelSystem,
    w_ini: &Trajectory,
    horizon: usize,
    d_future: Option<&Signal>,
    form: DynamicsForm,
) -> Result<DynamicsVars> {
    let p = w_ini.len();
    let n_in = sys.n_u - sys.n_d;
    if p + horizon + 1 != sys.depth {
        return Err(Error::dim(format!(
            "initialization ({p}) plus horizon ({}) samples must equal the dictionary depth {}",
            horizon + 1,
            sys.depth
        )));
    }
    if w_ini.n_u() != n_in || w_ini.n_d() != sys.n_d || w_ini.n_y() != sys.n_y {
        return Err(Error::dim(format!(
            "initialization has (u, d, y) = ({}, {}, {}) channels, data has ({n_in}, {}, {})",
            w_ini.n_u(),
            w_ini.n_d(),
            w_ini.n_y(),
            sys.n_d,
            sys.n_y
        )));
    }
    match (sys.n_d, d_future) {
        (0, None) => {}
        (0, Some(_)) => {
            return Err(Error::invalid("disturbance schedule given but the data has no disturbance channel"))
        }
        (_, None) => return Err(Error::invalid("the data has a disturbance channel: a future schedule is required")),
        (n_d, Some(d)) => {
            if d.dim() != n_d || d.len() != horizon + 1 {
                return Err(Error::dim(format!(
                    "future disturbance is {}x{}, expected {}x{n_d}",
                    d.len(),
                    d.dim(),
                    horizon + 1
                )));
            }
        }
    }

    let alpha: Vec<VarId> = (0..sys.columns()).map(|j| prob.free(format!("alpha_{j}"))).collect();
    let u: Vec<Vec<VarId>> =
        (0..=horizon).map(|t| (0..n_in).map(|c| prob.free(format!("u{}_{t}", c + 1))).collect()).collect();
    let y: Vec<Vec<VarId>> =
        (0..=horizon).map(|t| (0..sys.n_y).map(|c| prob.free(format!("y{}_{t}", c + 1))).collect()).collect();

    // Right-hand side entries in the row order of `[Hu; Hy]`.
    let exo_ini = w_ini.exogenous();
    let mut w: Vec<Entry> = Vec::with_capacity(sys.depth * (sys.n_u + sys.n_y));
    for t in 0..sys.depth {
        for c in 0..sys.n_u {
            w.push(if t < p {
                Entry::Const(exo_ini.sample(t)[c])
            } else if c < n_in {
                Entry::Var(u[t - p][c])
            } else {
                Entry::Const(d_future.expect("checked above").sample(t - p)[c - n_in])
            });
        }
    }
    for t in 0..sys.depth {
        for c in 0..sys.n_y {
            w.push(if t < p { Entry::Const(w_ini.y.sample(t)[c]) } else { Entry::Var(y[t - p][c]) });
        }
    }
    let h = sys.stacked();
    match form {
        DynamicsForm::Hankel => {
            for (r, entry) in w.iter().enumerate() {
                let mut terms: Vec<(VarId, f64)> = alpha.iter().zip(h.row(r)).map(|(&v, &a)| (v, a)).collect();
                let rhs = match *entry {
                    Entry::Const(v) => v,
                    Entry::Var(v) => {
                        terms.push((v, -1.0));
                        0.0
                    }
                };
                prob.add_constraint(terms, Sense::Eq, rhs)?;
            }
        }
        DynamicsForm::Orthogonal => {
            let qr = ColPivQr::factor(&h);
            let rank = qr.rank(numerics::DEFAULT_RANK_TOL);
            let qt = qr.qt();
            for k in 0..w.len() {
                let r_row = qr.r_row(k);
                // Rows within the rank are scaled to a unit `α` part.
                let scale = if k < rank { 1.0 / numerics::norm2(&r_row) } else { 1.0 };
                let mut terms: Vec<(VarId, f64)> = Vec::new();
                if k < rank {
                    terms.extend(alpha.iter().zip(&r_row).map(|(&v, &a)| (v, a * scale)));
                }
                let mut rhs = 0.0;
                for (i, entry) in w.iter().enumerate() {
                    let q = qt.get(k, i) * scale;
                    match *entry {
                        Entry::Const(v) => rhs += q * v,
                        Entry::Var(v) => terms.push((v, -q)),
                    }
                }
                prob.add_constraint(terms, Sense::Eq, rhs)?;
            }
        }
    }
    prob.meta = ProblemMeta { t_ini: p, horizon, n_u: n_in, n_y: sys.n_y };
    Ok(DynamicsVars { alpha, u, y })
}

#[derive(Clone, Copy)]
enum Entry {
    Const(f64),
    Var(VarId),
}

/// Truth value of a subformula at one time step: a constant, or a variable
/// in `[0, 1]` possibly negated (`1 - z`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Zeta {
    Const(bool),
    Lit { var: VarId, negated: bool },
}

impl Zeta {
    fn negate(self) -> Zeta {
        match self {
            Zeta::Const(b) => Zeta::Const(!b),
            Zeta::Lit { var, negated } => Zeta::Lit { var, negated: !negated },
        }
    }

    /// `(var, coefficient, constant)` with value `coefficient * x[var] + constant`.
    fn affine(self) -> (VarId, f64, f64) {
        match self {
            Zeta::Lit { var, negated: false } => (var, 1.0, 0.0),
            Zeta::Lit { var, negated: true } => (var, -1.0, 1.0),
            Zeta::Const(_) => unreachable!("constants are folded before use"),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Zeta::Const(b) => f64::from(u8::from(b)),
            lit => {
                let (v, a, k) = lit.affine();
                a * x[v.0] + k
            }
        }
    }
}

/// One binary predicate variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub var: VarId,
    pub t: usize,
    pub predicate: Predicate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaEncoding {
    /// Truth of the whole formula at time 0.
    pub root: Zeta,
    pub atoms: Vec<Atom>,
    /// Number of continuous `[0, 1]` variables introduced for composites.
    pub composites: usize,
}

impl FormulaEncoding {
    /// Atoms whose predicate magnitude reaches the big-M constant of their
    /// time step on the output `y`, as `(atom index, |σ|)`.
    pub fn big_m_violations(&self, y: &Signal, params: &EncodingParams) -> Vec<(usize, f64)> {
        self.atoms
            .iter()
            .enumerate()
            .filter_map(|(i, a)| {
                let s = a.predicate.value(y.sample(a.t), a.t).abs();
                (s >= params.at(a.t).0).then_some((i, s))
            })
            .collect()
    }
}

struct Encoder<'a> {
    prob: &'a mut MilpProblem,
    y: &'a [Vec<VarId>],
    last: usize,
    params: &'a EncodingParams,
    memo: HashMap<(usize, usize, bool), Zeta>,
    pred_ids: HashMap<usize, usize>,
    atoms: Vec<Atom>,
    composites: usize,
}

fn key(f: &StlFormula) -> usize {
    f as *const StlFormula as usize
}

impl Encoder<'_> {
    fn zeta(&mut self, f: &StlFormula, t: usize) -> Result<Zeta> {
        if let Some(z) = self.memo.get(&(key(f), t, false)) {
            return Ok(*z);
        }
        let clamp = |k: usize| k.min(self.last);
        let z = match f {
            StlFormula::True => Zeta::Const(true),
            StlFormula::False => Zeta::Const(false),
            StlFormula::Predicate(p) => self.predicate(f, p, t)?,
            StlFormula::Not(g) => self.zeta(g, t)?.negate(),
            StlFormula::And(gs) => {
                let zs = gs.iter().map(|g| self.zeta(g, t)).collect::<Result<Vec<_>>>()?;
                self.conj(zs)?
            }
            StlFormula::Or(gs) => {
                let zs = gs.iter().map(|g| self.zeta(g, t)).collect::<Result<Vec<_>>>()?;
                self.disj(zs)?
            }
            StlFormula::Always(a, b, g) => {
                let zs = (clamp(t + a)..=clamp(t + b)).map(|k| self.zeta(g, k)).collect::<Result<Vec<_>>>()?;
                self.conj(zs)?
            }
            StlFormula::Eventually(a, b, g) => {
                let zs = (clamp(t + a)..=clamp(t + b)).map(|k| self.zeta(g, k)).collect::<Result<Vec<_>>>()?;
                self.disj(zs)?
            }
            StlFormula::Until(a, b, l, r) => {
                // G[0,a] l  and  F[a,b] r  and  (l U r) at t+a, where the
                // last factor is the unbounded until truncated at L.
                let (ta, tb) = (clamp(t + a), clamp(t + b));
                let hold = (t..=ta).map(|k| self.zeta(l, k)).collect::<Result<Vec<_>>>()?;
                let hold = self.conj(hold)?;
                let reach = (ta..=tb).map(|k| self.zeta(r, k)).collect::<Result<Vec<_>>>()?;
                let reach = self.disj(reach)?;
                let chain = self.until_chain(f, l, r, ta)?;
                self.conj(vec![hold, reach, chain])?
            }
        };
        self.memo.insert((key(f), t, false), z);
        Ok(z)
    }

    /// `U_s = (l_s and r_s) or (l_s and U_{s+1})`, `U_L = l_L and r_L`.
    fn until_chain(&mut self, node: &StlFormula, l: &StlFormula, r: &StlFormula, s: usize) -> Result<Zeta> {
        if let Some(z) = self.memo.get(&(key(node), s, true)) {
            return Ok(*z);
        }
        let ls = self.zeta(l, s)?;
        let rs = self.zeta(r, s)?;
        let both = self.conj(vec![ls, rs])?;
        let z = if s >= self.last {
            both
        } else {
            let next = self.until_chain(node, l, r, s + 1)?;
            let carry = self.conj(vec![ls, next])?;
            self.disj(vec![both, carry])?
        };
        self.memo.insert((key(node), s, true), z);
        Ok(z)
    }

    fn predicate(&mut self, node: &StlFormula, p: &Predicate, t: usize) -> Result<Zeta> {
        if p.is_signal_free() {
            return Ok(Zeta::Const(p.offset_at(t) > 0.0));
        }
        let yt = self
            .y
            .get(t)
            .ok_or_else(|| Error::dim(format!("formula reads time {t}, only {} output samples", self.y.len())))?;
        if p.coeffs.len() != yt.len() {
            return Err(Error::dim(format!(
                "predicate `{p}` has {} coefficients, the system has {} outputs",
                p.coeffs.len(),
                yt.len()
            )));
        }
        let next = self.pred_ids.len();
        let id = *self.pred_ids.entry(key(node)).or_insert(next);
        let z = self.prob.binary(format!("zp{id}_t{t}"));
        let (m, eps) = self.params.at(t);
        let b = p.offset_at(t);
        let ay: Vec<(VarId, f64)> = yt.iter().zip(&p.coeffs).map(|(&v, &a)| (v, a)).collect();
        // σ ≤ M z - ε and -σ ≤ M (1 - z) - ε.
        self.prob.add_constraint(ay.iter().copied().chain([(z, -m)]), Sense::Le, -eps - b)?;
        self.prob.add_constraint(ay.iter().map(|&(v, a)| (v, -a)).chain([(z, m)]), Sense::Le, m - eps + b)?;
        self.atoms.push(Atom { var: z, t, predicate: p.clone() });
        Ok(Zeta::Lit { var: z, negated: false })
    }

    /// Drops constants and duplicates; `None` means the result is the
    /// absorbing constant.
    fn simplify(zs: Vec<Zeta>, absorbing: bool) -> Option<Vec<Zeta>> {
        let mut out: Vec<Zeta> = Vec::new();
        for z in zs {
            match z {
                Zeta::Const(b) if b == absorbing => return None,
                Zeta::Const(_) => {}
                lit => {
                    if out.contains(&lit.negate()) {
                        return None;
                    }
                    if !out.contains(&lit) {
                        out.push(lit);
                    }
                }
            }
        }
        Some(out)
    }

    fn composite(&mut self) -> VarId {
        let v = self.prob.unit_interval(format!("zc{}", self.composites));
        self.composites += 1;
        v
    }

    /// `w ≤ z_i` and `w ≥ 1 - m + Σ z_i`.
    fn conj(&mut self, zs: Vec<Zeta>) -> Result<Zeta> {
        let Some(lits) = Self::simplify(zs, false) else { return Ok(Zeta::Const(false)) };
        match lits.len() {
            0 => return Ok(Zeta::Const(true)),
            1 => return Ok(lits[0]),
            _ => {}
        }
        let w = self.composite();
        let mut sum_terms = vec![(w, 1.0)];
        let mut sum_const = 0.0;
        for z in &lits {
            let (v, a, k) = z.affine();
            self.prob.add_constraint([(w, 1.0), (v, -a)], Sense::Le, k)?;
            sum_terms.push((v, -a));
            sum_const += k;
        }
        self.prob.add_constraint(sum_terms, Sense::Ge, 1.0 - lits.len() as f64 + sum_const)?;
        Ok(Zeta::Lit { var: w, negated: false })
    }

    /// `w ≥ z_i` and `w ≤ Σ z_i`.
    fn disj(&mut self, zs: Vec<Zeta>) -> Result<Zeta> {
        let Some(lits) = Self::simplify(zs, true) else { return Ok(Zeta::Const(true)) };
        match lits.len() {
            0 => return Ok(Zeta::Const(false)),
            1 => return Ok(lits[0]),
            _ => {}
        }
        let w = self.composite();
        let mut sum_terms = vec![(w, 1.0)];
        let mut sum_const = 0.0;
        for z in &lits {
            let (v, a, k) = z.affine();
            self.prob.add_constraint([(w, 1.0), (v, -a)], Sense::Ge, k)?;
            sum_terms.push((v, -a));
            sum_const += k;
        }
        self.prob.add_constraint(sum_terms, Sense::Le, sum_const)?;
        Ok(Zeta::Lit { var: w, negated: false })
    }
}

/// Encodes `phi` evaluated at time 0 over the outputs `y[0..=L]`.
///
/// Predicate truth values are binary; every composite gets a continuous
/// variable in `[0, 1]`. Variables are only created for time steps the
/// evaluation at 0 actually reaches, and signal-free predicates are folded
/// into constants.
pub fn encode_formula(
    prob: &mut MilpProblem,
    phi: &StlFormula,
    y: &[Vec<VarId>],
    params: &EncodingParams,
) -> Result<FormulaEncoding> {
    params.validate()?;
    if y.is_empty() {
        return Err(Error::invalid("cannot encode a formula over an empty output sequence"));
    }
    let mut enc = Encoder {
        prob,
        y,
        last: y.len() - 1,
        params,
        memo: HashMap::new(),
        pred_ids: HashMap::new(),
        atoms: Vec::new(),
        composites: 0,
    };
    let root = enc.zeta(phi, 0)?;
    Ok(FormulaEncoding { root, atoms: enc.atoms, composites: enc.composites })
}

/// Weighted 1-norm objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// `Σ_t ‖u_t‖₁`
    InputNorm,
    /// `Σ_t ‖y_t‖₁`
    OutputNorm,
    /// `Σ_t Σ_i r_i |u_t,i| + q_i |y_t,i|`
    Mixed { r: Vec<f64>, q: Vec<f64> },
}

/// Adds `s ≥ x`, `s ≥ -x` for every weighted variable and minimizes the
/// weighted sum of the `s`.
pub fn encode_cost(prob: &mut MilpProblem, kind: &CostKind, u: &[Vec<VarId>], y: &[Vec<VarId>]) -> Result<()> {
    let n_u = u.first().map_or(0, Vec::len);
    let n_y = y.first().map_or(0, Vec::len);
    let (r, q) = match kind {
        CostKind::InputNorm => (vec![1.0; n_u], vec![0.0; n_y]),
        CostKind::OutputNorm => (vec![0.0; n_u], vec![1.0; n_y]),
        CostKind::Mixed { r, q } => (r.clone(), q.clone()),
    };
    if r.len() != n_u || q.len() != n_y {
        return Err(Error::dim(format!(
            "cost weights have ({}, {}) entries, the system has ({n_u}, {n_y}) inputs/outputs",
            r.len(),
            q.len()
        )));
    }
    if let Some(w) = r.iter().chain(&q).find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::invalid(format!("cost weights must be nonnegative, got {w}")));
    }
    for (prefix, vars, weights) in [("su", u, &r), ("sy", y, &q)] {
        for (t, row) in vars.iter().enumerate() {
            for (c, (&x, &w)) in row.iter().zip(weights.iter()).enumerate() {
                if w == 0.0 {
                    continue;
                }
                let s = prob.continuous(format!("{prefix}{}_{t}", c + 1), 0.0, f64::INFINITY);
                prob.add_constraint([(s, 1.0), (x, -1.0)], Sense::Ge, 0.0)?;
                prob.add_constraint([(s, 1.0), (x, 1.0)], Sense::Ge, 0.0)?;
                prob.add_objective(s, w);
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemHandles {
    pub dynamics: DynamicsVars,
    pub formula: FormulaEncoding,
}

/// The complete synthesis program: dynamics, specification pinned true at
/// time 0, input bounds and cost.
///
/// The horizon is `sys.depth - w_ini.len() - 1` and must cover the formula.
#[allow(clippy::too_many_arguments)]
pub fn assemble_problem(
    sys: &HankelSystem,
    w_ini: &Trajectory,
    phi: &StlFormula,
    cost: &CostKind,
    input_box: &InputBox,
    d_future: Option<&Signal>,
    params: &EncodingParams,
) -> Result<(MilpProblem, ProblemHandles)> {
    let horizon = sys
        .depth
        .checked_sub(w_ini.len() + 1)
        .ok_or_else(|| Error::dim(format!("initialization longer than the dictionary depth {}", sys.depth)))?;
    if horizon < phi.horizon() {
        return Err(Error::invalid(format!("horizon {horizon} is shorter than the formula horizon {}", phi.horizon())));
    }
    let n_in = sys.n_u - sys.n_d;
    if input_box.dim() != n_in {
        return Err(Error::dim(format!("input box has {} channels, the system has {n_in} inputs", input_box.dim())));
    }
    let mut prob = MilpProblem::new();
    let dynamics = encode_dynamics_as(&mut prob, sys, w_ini, horizon, d_future, params.dynamics)?;
    let handles = complete_problem(&mut prob, dynamics, phi, cost, input_box, params)?;
    Ok((prob, handles))
}

/// Adds everything except the dynamics: input bounds, the specification
/// pinned true at time 0 and the cost. Shared by every dynamics encoding.
pub fn complete_problem(
    prob: &mut MilpProblem,
    dynamics: DynamicsVars,
    phi: &StlFormula,
    cost: &CostKind,
    input_box: &InputBox,
    params: &EncodingParams,
) -> Result<ProblemHandles> {
    if dynamics.y.len() <= phi.horizon() {
        return Err(Error::invalid(format!(
            "{} output samples cannot decide a formula of horizon {}",
            dynamics.y.len(),
            phi.horizon()
        )));
    }
    for row in &dynamics.u {
        if row.len() != input_box.dim() {
            return Err(Error::dim(format!(
                "input box has {} channels, the system has {} inputs",
                input_box.dim(),
                row.len()
            )));
        }
        for (c, &v) in row.iter().enumerate() {
            prob.vars[v.0].lo = input_box.lo[c];
            prob.vars[v.0].hi = input_box.hi[c];
        }
    }
    let formula = encode_formula(prob, phi, &dynamics.y, params)?;
    pin_true(prob, formula.root)?;
    encode_cost(prob, cost, &dynamics.u, &dynamics.y)?;
    Ok(ProblemHandles { dynamics, formula })
}

/// Requires `z = 1`.
pub(crate) fn pin_true(prob: &mut MilpProblem, z: Zeta) -> Result<()> {
    match z {
        Zeta::Const(true) => Ok(()),
        // An empty row `0 >= 1` makes the program infeasible.
        Zeta::Const(false) => prob.add_constraint([], Sense::Ge, 1.0),
        Zeta::Lit { var, negated } => {
            prob.fix(var, if negated { 0.0 } else { 1.0 });
            Ok(())
        }
    }
}
