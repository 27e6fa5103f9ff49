//! Dense kernels, the reference eigensolver and error metrics.
//!
//! Everything here works in `f64`. Matrices are row-major. The power iteration
//! is the software oracle every circuit result is compared against.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, Index, IndexMut};

use crate::error::{Error, Result};
use crate::math;

/// Default step used to probe the growth rate of `I + probe_alpha * M`.
pub const DEFAULT_PROBE_ALPHA: f64 = 0.01;
/// Number of iterations averaged per growth-rate estimate.
pub const ABSCISSA_WINDOW: usize = 200;

/// Dense row-major real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Real vector with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("vector must not be empty"));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(data))
    }

    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        Self(data)
    }

    pub fn norm(&self) -> f64 {
        math::norm2(&self.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
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

/// An eigenvalue with its unit, sign-canonical eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigPair {
    pub value: f64,
    pub vector: Vector,
}

/// A square linear operator that can be applied without materializing it.
pub trait LinearMap {
    fn dim(&self) -> usize;

    /// `y = self * x`. Both slices have length [`dim`](Self::dim).
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// Maximum absolute row sum.
    fn norm_inf(&self) -> f64;
}

/// A coefficient matrix that can be mapped onto the crosspoint array.
pub trait SquareCoefficients: LinearMap {
    fn row_sums(&self) -> Vec<f64>;
    fn diagonal(&self) -> Vec<f64>;
    fn min_entry(&self) -> f64;
    fn to_dense(&self) -> Matrix;
}

impl<T: LinearMap + ?Sized> LinearMap for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }

    fn norm_inf(&self) -> f64 {
        (**self).norm_inf()
    }
}

impl<T: SquareCoefficients + ?Sized> SquareCoefficients for &T {
    fn row_sums(&self) -> Vec<f64> {
        (**self).row_sums()
    }

    fn diagonal(&self) -> Vec<f64> {
        (**self).diagonal()
    }

    fn min_entry(&self) -> f64 {
        (**self).min_entry()
    }

    fn to_dense(&self) -> Matrix {
        (**self).to_dense()
    }
}

impl LinearMap for Matrix {
    fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (k, yk) in y.iter_mut().enumerate() {
            *yk = dot(self.row(k), x);
        }
    }

    fn norm_inf(&self) -> f64 {
        Matrix::norm_inf(self)
    }
}

impl SquareCoefficients for Matrix {
    fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn to_dense(&self) -> Matrix {
        self.clone()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Matrix-vector product, accumulated left to right in each row.
pub fn matvec(a: &Matrix, x: &[f64]) -> Result<Vector> {
    if a.cols != x.len() {
        return Err(Error::DimensionMismatch {
            expected: a.cols,
            found: x.len(),
        });
    }
    Ok(Vector((0..a.rows).map(|k| dot(a.row(k), x)).collect()))
}

/// Flips the sign so the entry of largest magnitude is non-negative.
pub fn sign_canonical(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Dominant eigenpair of a non-negative square matrix by power iteration.
///
/// Starts from the uniform vector and stops once `|A v - lambda v| <= tol * |lambda|`.
/// A tied or oscillating dominant eigenvalue shows up as [`Error::NoConvergence`].
pub fn power_iteration(a: &Matrix, tol: f64, max_iter: usize) -> Result<EigPair> {
    a.require_square()?;
    if a.min_entry() < 0.0 {
        return Err(Error::NotPositive);
    }
    if a.row_sums().iter().all(|&s| s <= 0.0) {
        return Err(Error::NotPositive);
    }
    power_iteration_op(a, tol, max_iter).map(|(pair, _)| pair)
}

/// Power iteration on any operator; also returns the number of sweeps used.
pub fn power_iteration_op<A: LinearMap + ?Sized>(
    a: &A,
    tol: f64,
    max_iter: usize,
) -> Result<(EigPair, usize)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive"));
    }
    let n = a.dim();
    let mut v = vec![1.0 / math::sqrt(n as f64); n];
    let mut y = vec![0.0; n];
    let mut resid = vec![0.0; n];
    for it in 1..=max_iter {
        a.apply(&v, &mut y);
        let lambda = dot(&v, &y);
        for ((r, yk), vk) in resid.iter_mut().zip(&y).zip(&v) {
            *r = yk - lambda * vk;
        }
        if math::norm2(&resid) <= tol * lambda.abs() {
            sign_canonical(&mut v);
            return Ok((
                EigPair {
                    value: lambda,
                    vector: Vector(v),
                },
                it,
            ));
        }
        let norm = math::norm2(&y);
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        if !norm.is_finite() {
            return Err(Error::NonFinite);
        }
        for (vk, yk) in v.iter_mut().zip(&y) {
            *vk = yk / norm;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
    })
}

/// Largest real part among the eigenvalues of `m`.
///
/// Measured as the asymptotic growth rate of `(I + probe_alpha * M)^k w` from a
/// fixed pseudo-random start, averaged over windows of [`ABSCISSA_WINDOW`]
/// iterations. For a real dominant eigenvalue the estimate is exact up to
/// convergence; a complex pair is only averaged.
pub fn spectral_abscissa(m: &Matrix, probe_alpha: f64, tol: f64, max_iter: usize) -> Result<f64> {
    m.require_square()?;
    spectral_abscissa_op(m, probe_alpha, tol, max_iter)
}

pub fn spectral_abscissa_op<A: LinearMap + ?Sized>(
    m: &A,
    probe_alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    if !(probe_alpha > 0.0) || probe_alpha * m.norm_inf() >= 0.5 {
        return Err(Error::InvalidArgument(
            "probe_alpha must satisfy 0 < probe_alpha * |M|_inf < 0.5",
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive"));
    }
    let n = m.dim();
    let mut w: Vec<f64> = (0..n as u64)
        .map(|i| {
            let bits = math::splitmix64(0x5EED_0000 ^ i) >> 11;
            (bits as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect();
    let norm = math::norm2(&w);
    w.iter_mut().for_each(|x| *x /= norm);

    let mut mw = vec![0.0; n];
    let mut log_sum = 0.0;
    let mut previous: Option<f64> = None;
    for it in 1..=max_iter {
        m.apply(&w, &mut mw);
        for (wk, mk) in w.iter_mut().zip(&mw) {
            *wk += probe_alpha * mk;
        }
        let g = math::norm2(&w);
        if g == 0.0 || !g.is_finite() {
            return Err(Error::NoConvergence { iterations: it });
        }
        w.iter_mut().for_each(|x| *x /= g);
        log_sum += math::ln(g);
        if it % ABSCISSA_WINDOW == 0 {
            let growth = math::exp(log_sum / ABSCISSA_WINDOW as f64);
            let estimate = (growth - 1.0) / probe_alpha;
            log_sum = 0.0;
            if let Some(p) = previous {
                if (estimate - p).abs() <= tol * estimate.abs() + 1e-12 {
                    return Ok(estimate);
                }
            }
            previous = Some(estimate);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
    })
}

/// Euclidean distance between the unit-normalized, sign-aligned inputs.
pub fn solution_error(x: &[f64], x_star: &[f64]) -> Result<f64> {
    if x.len() != x_star.len() {
        return Err(Error::DimensionMismatch {
            expected: x_star.len(),
            found: x.len(),
        });
    }
    let nx = math::norm2(x);
    let ns = math::norm2(x_star);
    if nx == 0.0 || ns == 0.0 {
        return Err(Error::ZeroVector);
    }
    let sign = if dot(x, x_star) < 0.0 { -1.0 } else { 1.0 };
    let d2: f64 = x
        .iter()
        .zip(x_star)
        .map(|(a, b)| {
            let d = sign * a / nx - b / ns;
            d * d
        })
        .sum();
    Ok(math::sqrt(d2))
}
