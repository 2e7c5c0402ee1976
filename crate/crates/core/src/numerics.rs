//! Dense linear algebra at desk scale.
//!
//! Everything here is row-major `f64`. The two numerically interesting pieces
//! are the column-pivoted Householder QR, which backs both the numerical rank
//! (used for the persistence-of-excitation test) and least squares, and a
//! partial-pivoting LU used by the simplex basis reinversion.

use std::fmt;
use std::ops::{Deref, DerefMut, Index};

use crate::error::{Error, Result};

/// Default relative tolerance for [`rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!("{} entries cannot fill a {rows}x{cols} matrix", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dim(format!("row {i} has {} entries, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Matrix::from_row_major(rows.len(), cols, data)
    }

    pub fn column(values: &[f64]) -> Result<Self> {
        Matrix::from_row_major(values.len(), 1, values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Stores a finite value.
    ///
    /// Panics on NaN or infinity so the finiteness invariant cannot be broken.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(v.is_finite(), "attempt to store non-finite value {v} at ({i},{j})");
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn scale(&self, k: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * k).collect() }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::dim(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.cols {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} matrix by vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok(Vector((0..self.rows).map(|i| dot(self.row(i), x)).collect()))
    }

    /// Stacks matrices vertically; all must share a column count.
    pub fn vstack(parts: &[&Matrix]) -> Result<Matrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for m in parts {
            if m.cols != cols {
                return Err(Error::dim(format!("vstack: {} columns vs {cols}", m.cols)));
            }
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm, scaled to avoid overflow on large entries.
pub fn norm2(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::dim(format!("cannot multiply {}x{} by {}x{}", a.rows, a.cols, b.rows, b.cols)));
    }
    let mut c = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out = &mut c.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in out.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    Ok(c)
}

/// Householder QR with column pivoting, `A P = Q R`.
///
/// `R` is kept in the upper triangle of `qr`; the Householder vectors live
/// below the diagonal with their leading entries in `beta_v0`.
#[derive(Debug, Clone)]
pub struct ColPivQr {
    m: usize,
    n: usize,
    qr: Vec<f64>,
    /// (beta, v0) per reflector.
    reflectors: Vec<(f64, f64)>,
    /// `perm[k]` is the original column placed at position k.
    perm: Vec<usize>,
}

impl ColPivQr {
    pub fn factor(a: &Matrix) -> Self {
        let (m, n) = a.shape();
        let mut qr = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let steps = m.min(n);
        let mut reflectors = Vec::with_capacity(steps);

        let col_norm = |qr: &[f64], j: usize, from: usize| -> f64 {
            let col: Vec<f64> = (from..m).map(|i| qr[i * n + j]).collect();
            norm2(&col)
        };

        for k in 0..steps {
            // Fresh norms each step; downdating loses accuracy on nearly
            // dependent Hankel columns.
            let (mut best, mut best_norm) = (k, -1.0);
            for j in k..n {
                let nj = col_norm(&qr, j, k);
                if nj > best_norm {
                    best = j;
                    best_norm = nj;
                }
            }
            if best != k {
                for i in 0..m {
                    qr.swap(i * n + k, i * n + best);
                }
                perm.swap(k, best);
            }

            let alpha = best_norm;
            if alpha == 0.0 {
                reflectors.push((0.0, 0.0));
                continue;
            }
            let x0 = qr[k * n + k];
            let r_kk = if x0 > 0.0 { -alpha } else { alpha };
            let v0 = x0 - r_kk;
            // v = (v0, x[k+1..]) ; beta = 2 / (v^T v)
            let mut vtv = v0 * v0;
            for i in k + 1..m {
                vtv += qr[i * n + k].powi(2);
            }
            let beta = if vtv == 0.0 { 0.0 } else { 2.0 / vtv };
            for j in k + 1..n {
                let mut s = v0 * qr[k * n + j];
                for i in k + 1..m {
                    s += qr[i * n + k] * qr[i * n + j];
                }
                s *= beta;
                qr[k * n + j] -= s * v0;
                for i in k + 1..m {
                    qr[i * n + j] -= s * qr[i * n + k];
                }
            }
            qr[k * n + k] = r_kk;
            reflectors.push((beta, v0));
        }

        ColPivQr { m, n, qr, reflectors, perm }
    }

    /// Magnitudes of the diagonal of `R`, nonincreasing up to rounding.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.reflectors.len()).map(|k| self.qr[k * self.n + k].abs()).collect()
    }

    /// Number of diagonal entries above `tol` times the largest one.
    pub fn rank(&self, tol: f64) -> usize {
        let d = self.diagonal();
        let Some(&largest) = d.first() else { return 0 };
        if largest == 0.0 {
            return 0;
        }
        d.iter().take_while(|&&v| v > tol * largest).count()
    }

    /// Row `k` of `R P^T`, i.e. of `Q^T A`, in the original column order.
    pub fn r_row(&self, k: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.n];
        if k < self.reflectors.len() {
            for j in k..self.n {
                row[self.perm[j]] = self.qr[k * self.n + j];
            }
        }
        row
    }

    /// Explicit `Q^T`, row-major `m x m`.
    pub fn qt(&self) -> Matrix {
        let m = self.m;
        let mut out = Matrix::zeros(m, m);
        let mut e = vec![0.0; m];
        for i in 0..m {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[i] = 1.0;
            self.apply_qt(&mut e);
            for (k, &v) in e.iter().enumerate() {
                out.set(k, i, v);
            }
        }
        out
    }

    /// Overwrites `b` with `Q^T b`.
    pub fn apply_qt(&self, b: &mut [f64]) {
        let n = self.n;
        for (k, &(beta, v0)) in self.reflectors.iter().enumerate() {
            if beta == 0.0 {
                continue;
            }
            let mut s = v0 * b[k];
            for i in k + 1..self.m {
                s += self.qr[i * n + k] * b[i];
            }
            s *= beta;
            b[k] -= s * v0;
            for i in k + 1..self.m {
                b[i] -= s * self.qr[i * n + k];
            }
        }
    }

    /// Basic least-squares solution using the leading `rank` columns.
    pub fn solve(&self, b: &[f64], rank: usize) -> Vec<f64> {
        let n = self.n;
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let mut z = vec![0.0; rank];
        for k in (0..rank).rev() {
            let mut s = qtb[k];
            for j in k + 1..rank {
                s -= self.qr[k * n + j] * z[j];
            }
            z[k] = s / self.qr[k * n + k];
        }
        let mut x = vec![0.0; n];
        for (k, zk) in z.into_iter().enumerate() {
            x[self.perm[k]] = zk;
        }
        x
    }
}

/// Numerical rank: diagonal magnitudes of the pivoted `R` exceeding
/// `tol` times the largest. An empty matrix has rank 0.
pub fn rank(m: &Matrix, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("rank tolerance must be positive, got {tol}")));
    }
    if m.is_empty() {
        return Ok(0);
    }
    Ok(ColPivQr::factor(m).rank(tol))
}

#[derive(Debug, Clone, PartialEq)]
pub enum LeastSquares {
    /// Residual within tolerance.
    Solved { x: Vector, residual: f64 },
    /// No solution within tolerance; `x` is still the least-squares minimizer.
    Infeasible { x: Vector, residual: f64 },
}

impl LeastSquares {
    pub fn residual(&self) -> f64 {
        match self {
            LeastSquares::Solved { residual, .. } | LeastSquares::Infeasible { residual, .. } => *residual,
        }
    }

    pub fn solution(&self) -> Option<&Vector> {
        match self {
            LeastSquares::Solved { x, .. } => Some(x),
            LeastSquares::Infeasible { .. } => None,
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self, LeastSquares::Solved { .. })
    }
}

/// Minimizes `||a x - b||` and reports `Infeasible` when the residual exceeds
/// `tol * (1 + ||b||)`.
///
/// Rank-deficient systems get the basic solution from the pivoted QR, with
/// the rank cutoff at `max(m, n) * f64::EPSILON` relative to the largest
/// pivot.
pub fn solve_least_squares(a: &Matrix, b: &[f64], tol: f64) -> Result<LeastSquares> {
    if a.rows != b.len() {
        return Err(Error::dim(format!(
            "least squares with {}x{} matrix and rhs of length {}",
            a.rows,
            a.cols,
            b.len()
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares rhs"));
    }
    let x = if a.is_empty() {
        vec![0.0; a.cols]
    } else {
        let qr = ColPivQr::factor(a);
        let cutoff = (a.rows.max(a.cols) as f64) * f64::EPSILON;
        let r = qr.rank(cutoff);
        let mut x = qr.solve(b, r);
        // One step of iterative refinement.
        let ax = a.mul_vec(&x)?;
        let res: Vec<f64> = b.iter().zip(ax.iter()).map(|(bi, ai)| bi - ai).collect();
        let dx = qr.solve(&res, r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        x
    };
    let ax = a.mul_vec(&x)?;
    let residual = norm2(&b.iter().zip(ax.iter()).map(|(bi, ai)| bi - ai).collect::<Vec<_>>());
    let x = Vector(x);
    if residual <= tol * (1.0 + norm2(b)) {
        Ok(LeastSquares::Solved { x, residual })
    } else {
        Ok(LeastSquares::Infeasible { x, residual })
    }
}

/// LU factorization with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl Lu {
    /// Fails when a pivot falls below `tol` times the largest entry of its column.
    pub fn factor(a: &Matrix, tol: f64) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::dim(format!("LU of non-square {}x{} matrix", a.rows, a.cols)));
        }
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, lu[i * n + k].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= tol * scale {
                return Err(Error::Numerical(format!("singular matrix at pivot {k}")));
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let d = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / d;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { n, lu, piv })
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let permuted: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        b.copy_from_slice(&permuted);
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * b[j];
            }
            b[i] = s / self.lu[i * n + i];
        }
    }

    /// Solves `A^T x = b` in place.
    pub fn solve_transpose(&self, b: &mut [f64]) {
        let n = self.n;
        // U^T z = b
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.lu[j * n + i] * b[j];
            }
            b[i] = s / self.lu[i * n + i];
        }
        // L^T w = z
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.lu[j * n + i] * b[j];
            }
            b[i] = s;
        }
        let mut out = vec![0.0; n];
        for (k, &p) in self.piv.iter().enumerate() {
            out[p] = b[k];
        }
        b.copy_from_slice(&out);
    }
}
