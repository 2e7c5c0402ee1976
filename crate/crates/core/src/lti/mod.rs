//! Discrete-time state-space models and the signals they produce.
//!
//! The simulator here is only ever used to generate data and to check
//! synthesized inputs in closed loop; synthesis itself never sees a model.

mod csv;
mod models;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{matmul, Matrix, Vector};

pub use self::csv::{read_schedule_csv, read_signal_csv, read_trajectory_csv, write_signal_csv, write_trajectory_csv};
pub use self::models::{building_defaults, builtin_model, default_order_bound, BuildingDefaults, BUILTIN_MODELS};

/// A sampled vector signal, stored sample-major (`dim` values per time step).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Signal {
    dim: usize,
    data: Vec<f64>,
}

impl Signal {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 && !data.is_empty() {
            return Err(Error::dim("zero-dimensional signal with samples"));
        }
        if dim > 0 && data.len() % dim != 0 {
            return Err(Error::dim(format!("{} values do not split into samples of dimension {dim}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("signal"));
        }
        Ok(Signal { dim, data })
    }

    pub fn zeros(dim: usize, len: usize) -> Self {
        Signal { dim, data: vec![0.0; dim * len] }
    }

    /// Scalar signal from a list of values.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Signal::new(1, values.to_vec())
    }

    pub fn from_samples<S: AsRef<[f64]>>(dim: usize, samples: &[S]) -> Result<Self> {
        let mut data = Vec::with_capacity(dim * samples.len());
        for (t, s) in samples.iter().enumerate() {
            let s = s.as_ref();
            if s.len() != dim {
                return Err(Error::dim(format!("sample {t} has {} channels, expected {dim}", s.len())));
            }
            data.extend_from_slice(s);
        }
        Signal::new(dim, data)
    }

    /// Repeats one sample `len` times.
    pub fn constant(sample: &[f64], len: usize) -> Result<Self> {
        let data = sample.iter().copied().cycle().take(sample.len() * len).collect();
        Signal::new(sample.len(), data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|t| self.data[t * self.dim + i]).collect()
    }

    pub fn slice(&self, from: usize, to: usize) -> Signal {
        Signal { dim: self.dim, data: self.data[from * self.dim..to * self.dim].to_vec() }
    }

    /// Concatenates in time.
    pub fn concat(&self, other: &Signal) -> Result<Signal> {
        if self.dim != other.dim {
            return Err(Error::dim(format!("cannot concatenate signals of dimension {} and {}", self.dim, other.dim)));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Signal { dim: self.dim, data })
    }

    /// Stacks channels of two equally long signals, `self` first.
    pub fn hstack(&self, other: &Signal) -> Result<Signal> {
        if self.len() != other.len() {
            return Err(Error::dim(format!("cannot stack signals of length {} and {}", self.len(), other.len())));
        }
        let dim = self.dim + other.dim;
        let mut data = Vec::with_capacity(dim * self.len());
        for t in 0..self.len() {
            data.extend_from_slice(self.sample(t));
            data.extend_from_slice(other.sample(t));
        }
        Ok(Signal { dim, data })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Signal> {
        Signal::new(self.dim, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs_diff(&self, other: &Signal) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Input/output samples of one experiment, with an optional known
/// disturbance channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub u: Signal,
    pub y: Signal,
    pub d: Option<Signal>,
}

impl Trajectory {
    pub fn new(u: Signal, y: Signal, d: Option<Signal>) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::dim(format!("{} input samples vs {} output samples", u.len(), y.len())));
        }
        if let Some(d) = &d {
            if d.len() != u.len() {
                return Err(Error::dim(format!("{} disturbance samples vs {} input samples", d.len(), u.len())));
            }
        }
        Ok(Trajectory { u, y, d })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn n_u(&self) -> usize {
        self.u.dim()
    }

    pub fn n_y(&self) -> usize {
        self.y.dim()
    }

    pub fn n_d(&self) -> usize {
        self.d.as_ref().map_or(0, Signal::dim)
    }

    /// Manipulated inputs followed by known disturbances, per sample.
    ///
    /// This is the "input" seen by the data-driven representation.
    pub fn exogenous(&self) -> Signal {
        match &self.d {
            Some(d) => self.u.hstack(d).expect("lengths checked at construction"),
            None => self.u.clone(),
        }
    }

    pub fn slice(&self, from: usize, to: usize) -> Trajectory {
        Trajectory {
            u: self.u.slice(from, to),
            y: self.y.slice(from, to),
            d: self.d.as_ref().map(|d| d.slice(from, to)),
        }
    }

    pub fn tail(&self, n: usize) -> Trajectory {
        let len = self.len();
        self.slice(len - n.min(len), len)
    }
}

/// `x+ = A x + B u + Bd d`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub name: String,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    pub bd: Option<Matrix>,
}

impl StateSpaceModel {
    /// `d` defaults to zero feedthrough.
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Option<Matrix>, bd: Option<Matrix>) -> Result<Self> {
        let n_x = a.rows();
        if a.cols() != n_x {
            return Err(Error::dim(format!("A must be square, got {}x{}", a.rows(), a.cols())));
        }
        if b.rows() != n_x {
            return Err(Error::dim(format!("B has {} rows, A is {n_x}x{n_x}", b.rows())));
        }
        if c.cols() != n_x {
            return Err(Error::dim(format!("C has {} columns, A is {n_x}x{n_x}", c.cols())));
        }
        let d = d.unwrap_or_else(|| Matrix::zeros(c.rows(), b.cols()));
        if d.shape() != (c.rows(), b.cols()) {
            return Err(Error::dim(format!("D is {}x{}, expected {}x{}", d.rows(), d.cols(), c.rows(), b.cols())));
        }
        if let Some(bd) = &bd {
            if bd.rows() != n_x {
                return Err(Error::dim(format!("Bd has {} rows, A is {n_x}x{n_x}", bd.rows())));
            }
        }
        Ok(StateSpaceModel { name: String::new(), a, b, c, d, bd })
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn n_x(&self) -> usize {
        self.a.rows()
    }

    pub fn n_u(&self) -> usize {
        self.b.cols()
    }

    pub fn n_y(&self) -> usize {
        self.c.rows()
    }

    pub fn n_d(&self) -> usize {
        self.bd.as_ref().map_or(0, Matrix::cols)
    }

    fn check_inputs(&self, u: &Signal, d: Option<&Signal>) -> Result<()> {
        if u.dim() != self.n_u() {
            return Err(Error::dim(format!("model takes {} inputs, signal has {}", self.n_u(), u.dim())));
        }
        match (&self.bd, d) {
            (Some(bd), Some(d)) => {
                if d.dim() != bd.cols() {
                    return Err(Error::dim(format!("model takes {} disturbances, signal has {}", bd.cols(), d.dim())));
                }
                if d.len() != u.len() {
                    return Err(Error::dim(format!("{} disturbance samples for {} input samples", d.len(), u.len())));
                }
                Ok(())
            }
            (None, None) => Ok(()),
            (Some(_), None) => Err(Error::dim(format!("model `{}` needs a disturbance sequence", self.name))),
            (None, Some(_)) => Err(Error::dim(format!("model `{}` has no disturbance channel", self.name))),
        }
    }

    /// One step of the state recursion.
    pub fn step(&self, x: &[f64], u: &[f64], d: Option<&[f64]>) -> Vec<f64> {
        let ax = self.a.mul_vec(x).expect("checked dims");
        let bu = self.b.mul_vec(u).expect("checked dims");
        let mut next: Vec<f64> = ax.iter().zip(bu.iter()).map(|(p, q)| p + q).collect();
        if let (Some(bd), Some(d)) = (&self.bd, d) {
            for (n, v) in next.iter_mut().zip(bd.mul_vec(d).expect("checked dims").iter()) {
                *n += v;
            }
        }
        next
    }

    pub fn output(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let cx = self.c.mul_vec(x).expect("checked dims");
        let du = self.d.mul_vec(u).expect("checked dims");
        cx.iter().zip(du.iter()).map(|(p, q)| p + q).collect()
    }

    /// Simulates from `x0`, returning the trajectory and the state after the
    /// last sample.
    pub fn simulate_from(&self, x0: &[f64], u: &Signal, d: Option<&Signal>) -> Result<(Trajectory, Vec<f64>)> {
        if x0.len() != self.n_x() {
            return Err(Error::dim(format!("x0 has length {}, model has {} states", x0.len(), self.n_x())));
        }
        self.check_inputs(u, d)?;
        let mut x = x0.to_vec();
        let mut y = Vec::with_capacity(u.len() * self.n_y());
        for t in 0..u.len() {
            y.extend(self.output(&x, u.sample(t)));
            x = self.step(&x, u.sample(t), d.map(|d| d.sample(t)));
        }
        let traj = Trajectory::new(u.clone(), Signal::new(self.n_y(), y)?, d.cloned())?;
        Ok((traj, x))
    }

    /// Maps an initial state and an input sequence to outputs:
    /// `y = O x0 + G u (+ Gd d)` over `len` samples. Returned as
    /// `(O, G, Gd)` with outputs stacked by time.
    pub fn response_matrices(&self, len: usize) -> (Matrix, Matrix, Option<Matrix>) {
        let (nx, nu, ny, nd) = (self.n_x(), self.n_u(), self.n_y(), self.n_d());
        let mut obs = Matrix::zeros(ny * len, nx);
        let mut gu = Matrix::zeros(ny * len, nu * len);
        let mut gd = self.bd.as_ref().map(|_| Matrix::zeros(ny * len, nd * len));
        // powers[k] = C A^k
        let mut cak = self.c.clone();
        let mut powers = Vec::with_capacity(len);
        for _ in 0..len {
            powers.push(cak.clone());
            cak = matmul(&cak, &self.a).expect("square A");
        }
        let markov_u: Vec<Matrix> = powers.iter().map(|p| matmul(p, &self.b).expect("dims")).collect();
        let markov_d: Option<Vec<Matrix>> =
            self.bd.as_ref().map(|bd| powers.iter().map(|p| matmul(p, bd).expect("dims")).collect());
        for t in 0..len {
            for i in 0..ny {
                for j in 0..nx {
                    obs.set(t * ny + i, j, powers[t][(i, j)]);
                }
                for s in 0..=t {
                    let blk = if s == t { &self.d } else { &markov_u[t - s - 1] };
                    for j in 0..nu {
                        gu.set(t * ny + i, s * nu + j, blk[(i, j)]);
                    }
                    if let (Some(gd), Some(md)) = (gd.as_mut(), markov_d.as_ref()) {
                        if s < t {
                            for j in 0..nd {
                                gd.set(t * ny + i, s * nd + j, md[t - s - 1][(i, j)]);
                            }
                        }
                    }
                }
            }
        }
        (obs, gu, gd)
    }
}

/// Runs the model from `x0` under `u` (and `d` when the model has a
/// disturbance channel).
pub fn simulate(model: &StateSpaceModel, x0: &Vector, u: &Signal, d: Option<&Signal>) -> Result<Trajectory> {
    model.simulate_from(x0, u, d).map(|(t, _)| t)
}

/// Per-channel closed intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl InputBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::dim(format!("{} lower vs {} upper bounds", lo.len(), hi.len())));
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(Error::invalid(format!("empty or unbounded interval [{l}, {h}] on channel {i}")));
            }
        }
        Ok(InputBox { lo, hi })
    }

    /// Same interval on every channel.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        InputBox::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, sample: &[f64]) -> bool {
        sample.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    fn draw(&self, rng: &mut ChaCha8Rng, len: usize) -> Signal {
        let mut data = Vec::with_capacity(len * self.dim());
        for _ in 0..len {
            for (l, h) in self.lo.iter().zip(&self.hi) {
                data.push(if l == h { *l } else { rng.gen_range(*l..=*h) });
            }
        }
        Signal { dim: self.dim(), data }
    }
}

/// How the disturbance channel is driven during data collection.
#[derive(Debug, Clone, PartialEq)]
pub enum Disturbance {
    /// i.i.d. uniform samples, drawn after the inputs from the same generator.
    Random(InputBox),
    /// A fixed, known sequence of at least `steps` samples.
    Schedule(Signal),
}

/// Collects one experiment from the zero state with i.i.d. uniform inputs.
///
/// Deterministic in `(seed, steps, input_box, disturbance)`. A model with a
/// disturbance channel and no `disturbance` gets an all-zero sequence.
pub fn generate_data(
    model: &StateSpaceModel,
    steps: usize,
    input_box: &InputBox,
    seed: u64,
    disturbance: Option<&Disturbance>,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::invalid("steps must be at least 1"));
    }
    if input_box.dim() != model.n_u() {
        return Err(Error::dim(format!("input box has {} channels, model has {}", input_box.dim(), model.n_u())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = input_box.draw(&mut rng, steps);
    let d = match (model.n_d(), disturbance) {
        (0, _) => None,
        (_, Some(Disturbance::Random(b))) => Some(b.draw(&mut rng, steps)),
        (_, Some(Disturbance::Schedule(s))) => {
            if s.len() < steps {
                return Err(Error::InsufficientData { needed: steps, got: s.len() });
            }
            Some(s.slice(0, steps))
        }
        (nd, None) => Some(Signal::zeros(nd, steps)),
    };
    let x0 = vec![0.0; model.n_x()];
    model.simulate_from(&x0, &u, d.as_ref()).map(|(t, _)| t)
}
