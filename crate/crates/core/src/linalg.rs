//! Dense 64-bit vectors and row-major matrices.
//!
//! Everything downstream (cells, solvers, streams) works on flat
//! coordinates, so this module stays deliberately small: products, norms,
//! a pivoted linear solve and power-iteration spectral norm estimates.

use std::fmt;
use std::ops::Deref;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of power iterations for [`spectral_norm_estimate`].
pub const DEFAULT_POWER_ITERS: usize = 100;

/// Finite, non-empty column of `f64` values.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidParameter("vector length must be positive".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Vector(data))
    }

    /// Wraps values that are already known to be finite. Solvers use this on
    /// intermediate iterates and check finiteness themselves.
    pub(crate) fn from_raw(data: Vec<f64>) -> Self {
        Vector(data)
    }

    pub fn zeros(len: usize) -> Self {
        Vector(vec![0.0; len.max(1)])
    }

    /// Seeded i.i.d. standard normal entries.
    pub fn standard_normal(len: usize, rng: &mut ChaCha8Rng) -> Self {
        Vector((0..len.max(1)).map(|_| StandardNormal.sample(rng)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        same_len("dot", self, other)?;
        Ok(dot(&self.0, &other.0))
    }

    /// `self - other`.
    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        same_len("sub", self, other)?;
        Ok(Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    /// `alpha * self + beta * other`.
    pub fn lincomb(&self, alpha: f64, other: &Vector, beta: f64) -> Result<Vector> {
        same_len("lincomb", self, other)?;
        Ok(Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        ))
    }

    pub fn scale(&self, alpha: f64) -> Vector {
        Vector(self.0.iter().map(|v| alpha * v).collect())
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(data: Vec<f64>) -> Result<Self> {
        Vector::new(data)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

fn same_len(op: &'static str, a: &Vector, b: &Vector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dims(op, format!("len {}", a.len()), format!("len {}", b.len())));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Dense row-major matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "matrix shape must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::dims(
                "Matrix::new",
                format!("{rows}x{cols}"),
                format!("{} values", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter("ragged matrix rows".into()));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn standard_normal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        Matrix {
            rows,
            cols,
            data: (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect(),
        }
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

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub(crate) fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// `self * v` on raw slices; caller guarantees `v.len() == cols`.
    pub(crate) fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.data.chunks_exact(self.cols).map(|row| dot(row, v)).collect()
    }

    /// `selfᵀ * v`; caller guarantees `v.len() == rows`.
    pub(crate) fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, &vi) in self.data.chunks_exact(self.cols).zip(v) {
            for (o, &m) in out.iter_mut().zip(row) {
                *o += m * vi;
            }
        }
        out
    }

    /// Solves `self * x = rhs` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, rhs: &Vector) -> Result<Vector> {
        if self.rows != self.cols {
            return Err(Error::dims("solve", self.shape_str(), "square matrix"));
        }
        if rhs.len() != self.rows {
            return Err(Error::dims("solve", self.shape_str(), format!("len {}", rhs.len())));
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let mut b = rhs.as_slice().to_vec();
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
                .unwrap_or(k);
            if a[pivot * n + k] == 0.0 {
                return Err(Error::InvalidParameter("singular matrix".into()));
            }
            if pivot != k {
                for c in 0..n {
                    a.swap(k * n + c, pivot * n + c);
                }
                b.swap(k, pivot);
            }
            let diag = a[k * n + k];
            for i in k + 1..n {
                let factor = a[i * n + k] / diag;
                if factor == 0.0 {
                    continue;
                }
                for c in k..n {
                    a[i * n + c] -= factor * a[k * n + c];
                }
                b[i] -= factor * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let tail: f64 = (k + 1..n).map(|c| a[k * n + c] * x[c]).sum();
            x[k] = (b[k] - tail) / a[k * n + k];
        }
        Vector::new(x)
    }

    fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.data.chunks_exact(self.cols))
            .finish()
    }
}

pub fn matvec(m: &Matrix, v: &Vector) -> Result<Vector> {
    if m.cols != v.len() {
        return Err(Error::dims("matvec", format!("matrix {}", m.shape_str()), format!("vector len {}", v.len())));
    }
    Ok(Vector(m.apply(v)))
}

/// Squared Euclidean distance `Σ (aᵢ − bᵢ)²`.
pub fn sq_distance(a: &Vector, b: &Vector) -> Result<f64> {
    same_len("sq_distance", a, b)?;
    Ok(sq_distance_raw(a, b))
}

pub(crate) fn sq_distance_raw(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn l2_norm(v: &Vector) -> f64 {
    norm(v)
}

/// Power-iteration estimate of the largest singular value of `m`.
///
/// Iterates `v ← MᵀMv / ‖MᵀMv‖` from a seeded Gaussian start and returns
/// `‖Mv‖`. Since `v` stays a unit vector the estimate never exceeds the true
/// value.
pub fn spectral_norm_estimate(m: &Matrix, iters: usize, seed: u64) -> f64 {
    power_iteration(m, iters.max(1), seed, None)
}

/// Power iteration run until the estimate stops moving (relative change
/// below `1e-15`) or `max_iters` is reached. Used where the estimate feeds a
/// normalization and must be tight.
pub fn spectral_norm_converged(m: &Matrix, max_iters: usize, seed: u64) -> f64 {
    power_iteration(m, max_iters.max(1), seed, Some(1e-15))
}

fn power_iteration(m: &Matrix, iters: usize, seed: u64, rel_tol: Option<f64>) -> f64 {
    if m.is_zero() {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..m.cols).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);

    let mut sigma = norm(&m.apply(&v));
    let mut stalled = 0;
    for _ in 0..iters {
        let w = m.apply_transpose(&m.apply(&v));
        let nw = norm(&w);
        if nw == 0.0 {
            // start vector landed in the null space
            break;
        }
        v = w.into_iter().map(|x| x / nw).collect();
        let next = norm(&m.apply(&v));
        let delta = (next - sigma).abs();
        sigma = next;
        if let Some(tol) = rel_tol {
            if delta <= tol * sigma {
                stalled += 1;
                if stalled >= 3 {
                    break;
                }
            } else {
                stalled = 0;
            }
        }
    }
    sigma
}
