//! Signal temporal logic over affine output predicates.
//!
//! Formulas are evaluated on finite sampled signals `y_0..y_L`. Every time
//! index an operator reads is clamped to `L`, the same truncation the MILP
//! encoder applies, so the monitor and the encoder agree on `[0, L]`.

mod parser;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::lti::Signal;

pub use self::parser::{parse, parse_with_schedules, ParseError};

/// A named per-time-step value, indexed by absolute time. Reads past the end
/// hold the last value.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub name: String,
    pub values: Arc<[f64]>,
}

impl Schedule {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Schedule { name: name.into(), values: values.into() }
    }

    pub fn at(&self, t: usize) -> f64 {
        match self.values.len() {
            0 => 0.0,
            n => self.values[t.min(n - 1)],
        }
    }
}

/// Schedules available to the parser, by name.
pub type Schedules = BTreeMap<String, Schedule>;

/// `coeffs · y_t + offset + Σ weight · schedule(t) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub coeffs: Vec<f64>,
    pub offset: f64,
    pub schedules: Vec<(f64, Schedule)>,
}

impl Predicate {
    pub fn new(coeffs: Vec<f64>, offset: f64) -> Self {
        Predicate { coeffs, offset, schedules: Vec::new() }
    }

    /// Constant part at absolute time `t`.
    pub fn offset_at(&self, t: usize) -> f64 {
        self.offset + self.schedules.iter().map(|(w, s)| w * s.at(t)).sum::<f64>()
    }

    pub fn value(&self, y: &[f64], t: usize) -> f64 {
        self.coeffs.iter().zip(y).map(|(a, v)| a * v).sum::<f64>() + self.offset_at(t)
    }

    /// True when the predicate does not read the signal at all.
    pub fn is_signal_free(&self) -> bool {
        self.coeffs.iter().all(|&a| a == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StlFormula {
    True,
    False,
    Predicate(Predicate),
    Not(Box<StlFormula>),
    And(Vec<StlFormula>),
    Or(Vec<StlFormula>),
    Always(usize, usize, Box<StlFormula>),
    Eventually(usize, usize, Box<StlFormula>),
    Until(usize, usize, Box<StlFormula>, Box<StlFormula>),
}

use StlFormula as F;

impl StlFormula {
    pub fn pred(coeffs: Vec<f64>, offset: f64) -> Self {
        F::Predicate(Predicate::new(coeffs, offset))
    }

    pub fn not(f: StlFormula) -> Self {
        F::Not(Box::new(f))
    }

    pub fn always(a: usize, b: usize, f: StlFormula) -> Self {
        F::Always(a, b, Box::new(f))
    }

    pub fn eventually(a: usize, b: usize, f: StlFormula) -> Self {
        F::Eventually(a, b, Box::new(f))
    }

    pub fn until(a: usize, b: usize, l: StlFormula, r: StlFormula) -> Self {
        F::Until(a, b, Box::new(l), Box::new(r))
    }

    /// Furthest time offset needed to decide satisfaction at time 0.
    pub fn horizon(&self) -> usize {
        match self {
            F::True | F::False | F::Predicate(_) => 0,
            F::Not(f) => f.horizon(),
            F::And(fs) | F::Or(fs) => fs.iter().map(StlFormula::horizon).max().unwrap_or(0),
            F::Always(_, b, f) | F::Eventually(_, b, f) => f.horizon() + b,
            F::Until(_, b, l, r) => l.horizon().max(r.horizon()) + b,
        }
    }

    /// Nesting depth of operators; atoms have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            F::True | F::False | F::Predicate(_) => 0,
            F::Not(f) | F::Always(_, _, f) | F::Eventually(_, _, f) => 1 + f.depth(),
            F::And(fs) | F::Or(fs) => 1 + fs.iter().map(StlFormula::depth).max().unwrap_or(0),
            F::Until(_, _, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// All predicates in the tree, left to right.
    pub fn predicates(&self) -> Vec<&Predicate> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let F::Predicate(p) = f {
                out.push(p);
            }
        });
        out
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a StlFormula)) {
        f(self);
        match self {
            F::True | F::False | F::Predicate(_) => {}
            F::Not(g) | F::Always(_, _, g) | F::Eventually(_, _, g) => g.visit(f),
            F::And(gs) | F::Or(gs) => gs.iter().for_each(|g| g.visit(f)),
            F::Until(_, _, l, r) => {
                l.visit(f);
                r.visit(f);
            }
        }
    }

    /// Largest output index referenced by a predicate, plus one.
    pub fn output_dim(&self) -> usize {
        self.predicates()
            .iter()
            .map(|p| p.coeffs.iter().rposition(|&a| a != 0.0).map_or(0, |i| i + 1))
            .max()
            .unwrap_or(0)
    }

    /// Boolean satisfaction `y, t ⊨ self`.
    ///
    /// # Panics
    /// If `y` is empty.
    pub fn monitor(&self, y: &Signal, t: usize) -> bool {
        assert!(!y.is_empty(), "cannot monitor an empty signal");
        let last = y.len() - 1;
        self.eval(y, t.min(last), last)
    }

    fn eval(&self, y: &Signal, t: usize, last: usize) -> bool {
        let clamp = |k: usize| k.min(last);
        match self {
            F::True => true,
            F::False => false,
            F::Predicate(p) => p.value(y.sample(t), t) > 0.0,
            F::Not(f) => !f.eval(y, t, last),
            F::And(fs) => fs.iter().all(|f| f.eval(y, t, last)),
            F::Or(fs) => fs.iter().any(|f| f.eval(y, t, last)),
            F::Always(a, b, f) => (clamp(t + a)..=clamp(t + b)).all(|k| f.eval(y, k, last)),
            F::Eventually(a, b, f) => (clamp(t + a)..=clamp(t + b)).any(|k| f.eval(y, k, last)),
            F::Until(a, b, l, r) => {
                (clamp(t + a)..=clamp(t + b)).any(|k| r.eval(y, k, last) && (t..=k).all(|j| l.eval(y, j, last)))
            }
        }
    }

    /// Earliest time at which an obligation of `self` (checked at `t = 0`)
    /// fails, or `None` when satisfied.
    ///
    /// For conjunctive structure (`and`, `G`) this is the first failing
    /// conjunct's own failure time; for anything else it is the time at
    /// which the failing subformula was evaluated.
    pub fn first_violation(&self, y: &Signal) -> Option<usize> {
        let last = y.len().checked_sub(1)?;
        self.violation(y, 0, last)
    }

    fn violation(&self, y: &Signal, t: usize, last: usize) -> Option<usize> {
        if self.eval(y, t, last) {
            return None;
        }
        match self {
            F::And(fs) => fs.iter().find_map(|f| f.violation(y, t, last)),
            F::Always(a, b, f) => ((t + a).min(last)..=(t + b).min(last)).find_map(|k| f.violation(y, k, last)),
            _ => Some(t),
        }
    }
}

fn fmt_num(v: f64) -> String {
    // `{:?}` is the shortest representation that parses back to the same bits.
    format!("{v:?}")
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0.0)
            .map(|(i, a)| format!("{}*y{}", fmt_num(*a), i + 1))
            .collect();
        terms.extend(self.schedules.iter().map(|(w, s)| format!("{}*{}", fmt_num(*w), s.name)));
        if self.offset != 0.0 || terms.is_empty() {
            terms.push(fmt_num(self.offset));
        }
        write!(f, "{} > 0", terms.join(" + "))
    }
}

impl fmt::Display for StlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, fs: &[StlFormula], op: &str| {
            write!(f, "(")?;
            for (i, g) in fs.iter().enumerate() {
                if i > 0 {
                    write!(f, " {op} ")?;
                }
                write!(f, "{g}")?;
            }
            write!(f, ")")
        };
        match self {
            F::True => write!(f, "true"),
            F::False => write!(f, "false"),
            F::Predicate(p) => write!(f, "({p})"),
            F::Not(g) => write!(f, "not {g}"),
            F::And(fs) => join(f, fs, "and"),
            F::Or(fs) => join(f, fs, "or"),
            F::Always(a, b, g) => write!(f, "G[{a},{b}] {g}"),
            F::Eventually(a, b, g) => write!(f, "F[{a},{b}] {g}"),
            F::Until(a, b, l, r) => write!(f, "({l} U[{a},{b}] {r})"),
        }
    }
}
