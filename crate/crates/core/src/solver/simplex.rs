//! Bounded-variable primal simplex on `A x - r = 0`, `lo <= (x, r) <= hi`.
//!
//! Every constraint gets a row-activity variable `r_i` whose bounds carry
//! the sense and right-hand side, so the all-slack basis is always
//! available. The basis inverse is kept dense and updated in product form;
//! it is recomputed from scratch periodically and before reporting.

use crate::milp::{MilpProblem, Sense};

const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const REINVERT_EVERY: usize = 64;
const DEGENERATE_BEFORE_BLAND: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Loc {
    Basic(usize),
    AtLo,
    AtHi,
    /// Nonbasic free variable held at zero.
    Zero,
}

/// A simplex basis that can be used to warm start a related solve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    basic: Vec<usize>,
    at_hi: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    /// The basis could not be brought to a verified optimum.
    NumericalTrouble,
}

pub struct Simplex {
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    pub(crate) lo: Vec<f64>,
    pub(crate) hi: Vec<f64>,
    basis: Vec<usize>,
    loc: Vec<Loc>,
    x: Vec<f64>,
    binv: Vec<f64>,
    since_reinvert: usize,
    pub iterations: usize,
    ptol: f64,
}

impl Simplex {
    pub fn new(prob: &MilpProblem, feastol: f64) -> Self {
        let m = prob.constraints.len();
        let n = prob.vars.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
        for (i, c) in prob.constraints.iter().enumerate() {
            for &(v, a) in &c.terms {
                cols[v.0].push((i, a));
            }
            cols[n + i].push((i, -1.0));
        }
        let mut cost = vec![0.0; n + m];
        for &(v, c) in &prob.objective {
            cost[v.0] += c;
        }
        let mut lo: Vec<f64> = prob.vars.iter().map(|v| v.lo).collect();
        let mut hi: Vec<f64> = prob.vars.iter().map(|v| v.hi).collect();
        for c in &prob.constraints {
            let (l, h) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            };
            lo.push(l);
            hi.push(h);
        }
        let mut s = Simplex {
            m,
            n,
            cols,
            cost,
            lo,
            hi,
            basis: (n..n + m).collect(),
            loc: vec![Loc::AtLo; n + m],
            x: vec![0.0; n + m],
            binv: Vec::new(),
            since_reinvert: 0,
            iterations: 0,
            ptol: (feastol * 1e-2).max(1e-12),
        };
        for (k, &j) in s.basis.iter().enumerate() {
            s.loc[j] = Loc::Basic(k);
        }
        for j in 0..n {
            s.place_nonbasic(j, false);
        }
        s.reinvert();
        s
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        if !matches!(self.loc[j], Loc::Basic(_)) {
            let prefer_hi = self.loc[j] == Loc::AtHi;
            self.place_nonbasic(j, prefer_hi);
        }
    }

    pub fn basis(&self) -> Basis {
        Basis { basic: self.basis.clone(), at_hi: self.loc.iter().map(|l| *l == Loc::AtHi).collect() }
    }

    /// Moves to basis `b`, by pivots when it is close to the current one.
    pub fn set_basis(&mut self, b: &Basis) {
        if b.basic.len() != self.m || b.at_hi.len() != self.n + self.m {
            return;
        }
        let entering: Vec<usize> = b.basic.iter().copied().filter(|&j| !matches!(self.loc[j], Loc::Basic(_))).collect();
        let mut in_target = vec![false; self.n + self.m];
        for &j in &b.basic {
            in_target[j] = true;
        }
        let mut ok = entering.len() <= self.m / 4;
        if ok {
            for q in entering {
                let alpha = self.ftran(q);
                let r = (0..self.m)
                    .filter(|&k| !in_target[self.basis[k]])
                    .max_by(|&a, &b| alpha[a].abs().total_cmp(&alpha[b].abs()));
                match r {
                    Some(r) if alpha[r].abs() > 1e-7 => {
                        let leave = self.basis[r];
                        self.pivot_inverse(r, &alpha);
                        self.since_reinvert += 1;
                        self.basis[r] = q;
                        self.loc[q] = Loc::Basic(r);
                        self.loc[leave] = Loc::AtLo;
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
        }
        if !ok {
            for l in self.loc.iter_mut() {
                *l = Loc::AtLo;
            }
            self.basis.clone_from(&b.basic);
            for (k, &j) in self.basis.iter().enumerate() {
                self.loc[j] = Loc::Basic(k);
            }
        }
        for j in 0..self.n + self.m {
            if !matches!(self.loc[j], Loc::Basic(_)) {
                self.place_nonbasic(j, b.at_hi[j]);
            }
        }
        if ok {
            self.recompute_basic();
        } else {
            self.reinvert();
        }
    }

    fn place_nonbasic(&mut self, j: usize, prefer_hi: bool) {
        let (l, h) = (self.lo[j], self.hi[j]);
        let (loc, v) = if prefer_hi && h.is_finite() {
            (Loc::AtHi, h)
        } else if l.is_finite() {
            (Loc::AtLo, l)
        } else if h.is_finite() {
            (Loc::AtHi, h)
        } else {
            (Loc::Zero, 0.0)
        };
        self.loc[j] = loc;
        self.x[j] = v;
    }

    /// `B^{-1} a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for &(i, a) in &self.cols[j] {
            for (k, o) in out.iter_mut().enumerate() {
                *o += self.binv[k * m + i] * a;
            }
        }
        out
    }

    /// `c_B^T B^{-1}`.
    fn btran(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &c) in cb.iter().enumerate() {
            if c != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for (yi, &b) in y.iter_mut().zip(row) {
                    *yi += c * b;
                }
            }
        }
        y
    }

    fn column_dot(&self, j: usize, y: &[f64]) -> f64 {
        self.cols[j].iter().map(|&(i, a)| a * y[i]).sum()
    }

    /// Recomputes the dense inverse, swapping in row variables for any
    /// dependent basis columns, then recomputes the basic values.
    fn reinvert(&mut self) {
        let m = self.m;
        self.since_reinvert = 0;
        if m == 0 {
            self.binv.clear();
            return;
        }
        loop {
            let mut b = vec![0.0; m * m];
            for (k, &j) in self.basis.iter().enumerate() {
                for &(i, a) in &self.cols[j] {
                    b[i * m + k] = a;
                }
            }
            let mut inv = vec![0.0; m * m];
            for i in 0..m {
                inv[i * m + i] = 1.0;
            }
            // Gauss-Jordan on the columns of B; row_of[k] is the pivot row of column k.
            let mut row_used = vec![false; m];
            let mut row_of = vec![usize::MAX; m];
            let mut dependent = Vec::new();
            for k in 0..m {
                let scale = (0..m).map(|i| b[i * m + k].abs()).fold(0.0, f64::max);
                let (p, pv) = (0..m)
                    .filter(|&i| !row_used[i])
                    .map(|i| (i, b[i * m + k].abs()))
                    .fold((usize::MAX, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
                if p == usize::MAX || pv <= 1e-11 * scale.max(1e-300) || pv < 1e-14 {
                    dependent.push(k);
                    continue;
                }
                row_used[p] = true;
                row_of[k] = p;
                let d = b[p * m + k];
                for c in 0..m {
                    b[p * m + c] /= d;
                    inv[p * m + c] /= d;
                }
                for i in 0..m {
                    if i == p {
                        continue;
                    }
                    let f = b[i * m + k];
                    if f != 0.0 {
                        for c in 0..m {
                            b[i * m + c] -= f * b[p * m + c];
                            inv[i * m + c] -= f * inv[p * m + c];
                        }
                    }
                }
            }
            if !dependent.is_empty() {
                let free_rows: Vec<usize> = (0..m).filter(|&i| !row_used[i]).collect();
                for (&k, &i) in dependent.iter().zip(&free_rows) {
                    let out = self.basis[k];
                    self.basis[k] = self.n + i;
                    self.loc[self.n + i] = Loc::Basic(k);
                    self.place_nonbasic(out, false);
                }
                continue;
            }
            // Row p of `inv` belongs to basis position k with row_of[k] = p.
            let mut binv = vec![0.0; m * m];
            for k in 0..m {
                let p = row_of[k];
                binv[k * m..(k + 1) * m].copy_from_slice(&inv[p * m..(p + 1) * m]);
            }
            self.binv = binv;
            break;
        }
        self.recompute_basic();
    }

    fn recompute_basic(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.n + self.m {
            if !matches!(self.loc[j], Loc::Basic(_)) && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    rhs[i] -= a * self.x[j];
                }
            }
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            self.x[self.basis[k]] = row.iter().zip(&rhs).map(|(b, r)| b * r).sum();
        }
    }

    fn pivot_inverse(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let d = alpha[r];
        for c in 0..m {
            self.binv[r * m + c] /= d;
        }
        let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for (k, &a) in alpha.iter().enumerate() {
            if k != r && a != 0.0 {
                let row = &mut self.binv[k * m..(k + 1) * m];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= a * p;
                }
            }
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        (self.lo[j] - self.x[j]).max(self.x[j] - self.hi[j]).max(0.0)
    }

    /// Largest bound violation of a basic variable.
    pub fn max_infeasibility(&self) -> f64 {
        self.basis.iter().map(|&j| self.infeasibility(j)).fold(0.0, f64::max)
    }

    /// Row duals of the current basis for the true objective.
    pub fn duals(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.btran(&cb)
    }

    /// Runs both phases from the current basis. Bounds may have changed
    /// since the last call.
    pub fn solve(&mut self, max_iter: usize) -> LpOutcome {
        self.recompute_basic();
        for _attempt in 0..4 {
            let out = self.run(max_iter);
            if out != LpOutcome::Optimal {
                return out;
            }
            self.reinvert();
            if self.max_infeasibility() <= self.ptol * 100.0 && self.dual_ok() {
                return LpOutcome::Optimal;
            }
        }
        LpOutcome::NumericalTrouble
    }

    fn dual_ok(&self) -> bool {
        let y = self.duals();
        (0..self.n + self.m).all(|j| {
            let d = self.cost[j] - self.column_dot(j, &y);
            match self.loc[j] {
                Loc::Basic(_) => true,
                _ if self.lo[j] == self.hi[j] => true,
                Loc::AtLo => d >= -DUAL_TOL * 10.0,
                Loc::AtHi => d <= DUAL_TOL * 10.0,
                Loc::Zero => d.abs() <= DUAL_TOL * 10.0,
            }
        })
    }

    fn run(&mut self, max_iter: usize) -> LpOutcome {
        let mut degenerate = 0usize;
        let mut stalled = 0usize;
        loop {
            if self.iterations >= max_iter {
                return LpOutcome::IterationLimit;
            }
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert();
            }
            let ptol = self.ptol;
            let phase1 = self.basis.iter().any(|&j| self.infeasibility(j) > ptol);
            let cb: Vec<f64> = if phase1 {
                self.basis
                    .iter()
                    .map(|&j| {
                        if self.x[j] < self.lo[j] - ptol {
                            -1.0
                        } else if self.x[j] > self.hi[j] + ptol {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            } else {
                self.basis.iter().map(|&j| self.cost[j]).collect()
            };
            let y = self.btran(&cb);
            let bland = degenerate >= DEGENERATE_BEFORE_BLAND;

            // Pricing.
            let mut best: Option<(usize, f64, f64)> = None; // (j, dir, score)
            for j in 0..self.n + self.m {
                let loc = self.loc[j];
                if matches!(loc, Loc::Basic(_)) || self.lo[j] == self.hi[j] {
                    continue;
                }
                let cj = if phase1 { 0.0 } else { self.cost[j] };
                let d = cj - self.column_dot(j, &y);
                let dir = match loc {
                    Loc::AtLo if d < -DUAL_TOL => 1.0,
                    Loc::AtHi if d > DUAL_TOL => -1.0,
                    Loc::Zero if d.abs() > DUAL_TOL => -d.signum(),
                    _ => continue,
                };
                let score = d.abs();
                if bland {
                    best = Some((j, dir, score));
                    break;
                }
                if best.map_or(true, |(_, _, s)| score > s) {
                    best = Some((j, dir, score));
                }
            }
            let Some((q, dir, _)) = best else {
                if phase1 {
                    return if self.max_infeasibility() <= ptol * 100.0 {
                        LpOutcome::Optimal
                    } else {
                        LpOutcome::Infeasible
                    };
                }
                return LpOutcome::Optimal;
            };

            // Ratio test: x_B(θ) = x_B - dir θ α.
            let alpha = self.ftran(q);
            let flip = self.hi[q] - self.lo[q];
            let htol = if bland { 0.0 } else { ptol };
            let limit = |k: usize, slack: f64| -> Option<(f64, bool)> {
                let j = self.basis[k];
                let g = -dir * alpha[k];
                if g.abs() < PIVOT_TOL {
                    return None;
                }
                let (l, h, xv) = (self.lo[j], self.hi[j], self.x[j]);
                if phase1 && xv < l - ptol {
                    return (g > 0.0).then(|| ((l + slack - xv) / g, false));
                }
                if phase1 && xv > h + ptol {
                    return (g < 0.0).then(|| ((h - slack - xv) / g, true));
                }
                if g > 0.0 && h.is_finite() {
                    Some(((h + slack - xv) / g, true))
                } else if g < 0.0 && l.is_finite() {
                    Some(((l - slack - xv) / g, false))
                } else {
                    None
                }
            };
            let mut theta_max = f64::INFINITY;
            for k in 0..self.m {
                if let Some((t, _)) = limit(k, htol) {
                    theta_max = theta_max.min(t.max(0.0));
                }
            }
            let mut leave: Option<(usize, f64, bool)> = None;
            for k in 0..self.m {
                if let Some((t, to_hi)) = limit(k, 0.0) {
                    let t = t.max(0.0);
                    if t <= theta_max {
                        let better = match leave {
                            None => true,
                            Some((kb, tb, _)) => {
                                if bland {
                                    t < tb || (t == tb && self.basis[k] < self.basis[kb])
                                } else {
                                    alpha[k].abs() > alpha[kb].abs()
                                }
                            }
                        };
                        if better {
                            leave = Some((k, t, to_hi));
                        }
                    }
                }
            }
            let theta_leave = leave.map_or(f64::INFINITY, |(_, t, _)| t);
            if flip.is_finite() && flip <= theta_leave {
                // Bound flip of the entering variable.
                self.iterations += 1;
                let step = dir * flip;
                self.x[q] += step;
                for k in 0..self.m {
                    self.x[self.basis[k]] -= step * alpha[k];
                }
                self.loc[q] = if dir > 0.0 { Loc::AtHi } else { Loc::AtLo };
                self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                degenerate = 0;
                continue;
            }
            let Some((r, theta, to_hi)) = leave else {
                if phase1 {
                    // Improving direction without a blocking variable: numerical trouble.
                    stalled += 1;
                    if stalled > 3 {
                        return LpOutcome::NumericalTrouble;
                    }
                    self.reinvert();
                    continue;
                }
                return LpOutcome::Unbounded;
            };
            self.iterations += 1;
            self.since_reinvert += 1;
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let step = dir * theta;
            self.x[q] += step;
            for k in 0..self.m {
                self.x[self.basis[k]] -= step * alpha[k];
            }
            let out = self.basis[r];
            self.pivot_inverse(r, &alpha);
            self.basis[r] = q;
            self.loc[q] = Loc::Basic(r);
            if to_hi {
                self.loc[out] = Loc::AtHi;
                self.x[out] = self.hi[out];
            } else {
                self.loc[out] = Loc::AtLo;
                self.x[out] = self.lo[out];
            }
        }
    }
}
