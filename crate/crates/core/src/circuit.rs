//! Circuit objects: op-amp model, mapped eigenvalues, the diagonal
//! normalization `U` and the `2N x 2N` associated matrix `M`.
//!
//! With `x` the inverter outputs and `z = 2/(L0*w0) dx/dt`, the closed loop
//! obeys `d/dt [x; z] = L0*w0 * M [x; z]` where
//!
//! ```text
//!     M = [ 0            I/2          ]
//!         [ U (A - Lam)  -(Lam U + I/2) ]
//! ```
//!
//! `Lam` holds the implemented feedback eigenvalue of each transimpedance
//! amplifier and `U_kk = 1 / (Lam_kk + sum_j A_kj)`.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    self, LinearMap, Matrix, SquareCoefficients, Vector, ABSCISSA_WINDOW, DEFAULT_PROBE_ALPHA,
};

/// Single-pole op-amp: `L(s) = L0 / (1 + s/omega0)`, outputs limited to `+-v_supp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpAmpParams {
    /// DC open-loop gain.
    pub l0: f64,
    /// 3-dB bandwidth in rad/s.
    pub omega0: f64,
    /// Symmetric supply rail in volts.
    pub v_supp: f64,
}

impl OpAmpParams {
    pub const DEFAULT_L0: f64 = 1e5;
    /// Gain-bandwidth product of the default amplifier, in Hz.
    pub const DEFAULT_GBW_HZ: f64 = 16e6;
    pub const DEFAULT_V_SUPP: f64 = 1.0;

    pub fn new(l0: f64, omega0: f64, v_supp: f64) -> Result<Self> {
        if !(l0 >= 1e3) || !l0.is_finite() {
            return Err(Error::InvalidArgument("open-loop gain L0 must be >= 1e3"));
        }
        if !(omega0 > 0.0) || !omega0.is_finite() {
            return Err(Error::InvalidArgument("bandwidth omega0 must be positive"));
        }
        if !(v_supp > 0.0) || !v_supp.is_finite() {
            return Err(Error::InvalidArgument("supply voltage must be positive"));
        }
        Ok(Self { l0, omega0, v_supp })
    }

    /// Builds the parameters from a gain-bandwidth product in Hz.
    pub fn from_gbw_hz(l0: f64, gbw_hz: f64, v_supp: f64) -> Result<Self> {
        Self::new(l0, 2.0 * core::f64::consts::PI * gbw_hz / l0, v_supp)
    }

    /// `L0 * omega0` in rad/s; the time scale of the dynamics.
    pub fn gain_bandwidth(&self) -> f64 {
        self.l0 * self.omega0
    }

    pub fn gbw_hz(&self) -> f64 {
        self.gain_bandwidth() / (2.0 * core::f64::consts::PI)
    }
}

impl Default for OpAmpParams {
    fn default() -> Self {
        Self::from_gbw_hz(Self::DEFAULT_L0, Self::DEFAULT_GBW_HZ, Self::DEFAULT_V_SUPP)
            .expect("default op-amp parameters are valid")
    }
}

/// `(1 - delta) * lambda_max`: the eigenvalue actually implemented in the feedback.
pub fn map_eigenvalue(lambda_max: f64, delta: f64) -> Result<f64> {
    if !(lambda_max > 0.0) {
        return Err(Error::InvalidArgument("lambda_max must be positive"));
    }
    if !(delta < 1.0) {
        return Err(Error::InvalidArgument("delta must be below 1"));
    }
    Ok((1.0 - delta) * lambda_max)
}

fn u_diagonal(row_sums: &[f64], lambdas: &[f64]) -> Result<Vec<f64>> {
    if row_sums.len() != lambdas.len() {
        return Err(Error::DimensionMismatch {
            expected: row_sums.len(),
            found: lambdas.len(),
        });
    }
    row_sums
        .iter()
        .zip(lambdas)
        .map(|(r, l)| {
            let denom = l + r;
            if denom > 0.0 && denom.is_finite() {
                Ok(1.0 / denom)
            } else {
                Err(Error::InvalidArgument("U denominator must be positive"))
            }
        })
        .collect()
}

/// Diagonal `U` with `U_kk = 1 / (lambdas_k + sum_j A_kj)`.
pub fn build_u<A: SquareCoefficients + ?Sized>(a: &A, lambdas: &[f64]) -> Result<Matrix> {
    Ok(Matrix::diag(&u_diagonal(&a.row_sums(), lambdas)?))
}

/// Dense associated matrix for per-amplifier eigenvalues `lambdas`.
/// Equal entries give the uniform-mismatch form.
pub fn build_m(a: &Matrix, lambdas: &[f64]) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let u = u_diagonal(&a.row_sums(), lambdas)?;
    Ok(assemble_m(a, &u, lambdas))
}

fn assemble_m(a: &Matrix, u: &[f64], lambdas: &[f64]) -> Matrix {
    let n = a.rows();
    let mut m = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = 0.5;
        for j in 0..n {
            let shifted = if i == j { a[(i, j)] - lambdas[i] } else { a[(i, j)] };
            m[(n + i, j)] = u[i] * shifted;
        }
        m[(n + i, n + i)] = -(lambdas[i] * u[i] + 0.5);
    }
    m
}

/// Draws `n` mismatch values uniformly from the open interval `(0, delta_max)`.
pub fn sample_variation(delta_max: f64, n: usize, seed: u64) -> Result<Vector> {
    if !(delta_max > 0.0) || !delta_max.is_finite() {
        return Err(Error::InvalidArgument("delta_max must be positive"));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n)
        .map(|_| loop {
            let d: f64 = rng.gen_range(0.0..delta_max);
            if d > 0.0 {
                break d;
            }
        })
        .collect();
    Ok(Vector::from_vec_unchecked(values))
}

/// A coefficient matrix wired into the eigenvector circuit.
#[derive(Debug, Clone)]
pub struct EigenSystem<A = Matrix> {
    a: A,
    lambda_max: f64,
    delta: Option<f64>,
    lambdas: Vector,
    u: Vector,
    params: OpAmpParams,
}

impl EigenSystem<Matrix> {
    /// Uniform system with `lambda_max` taken from the power-iteration oracle.
    pub fn from_matrix(a: Matrix, delta: f64, params: OpAmpParams) -> Result<Self> {
        let lambda_max = dominant(&a)?.value;
        Self::uniform(a, lambda_max, delta, params)
    }
}

impl<A: SquareCoefficients> EigenSystem<A> {
    /// Every amplifier implements `(1 - delta) * lambda_max`.
    pub fn uniform(a: A, lambda_max: f64, delta: f64, params: OpAmpParams) -> Result<Self> {
        let lambda_g = map_eigenvalue(lambda_max, delta)?;
        let lambdas = alloc::vec![lambda_g; a.dim()];
        let mut sys = Self::build(a, lambda_max, lambdas, params)?;
        sys.delta = Some(delta);
        Ok(sys)
    }

    /// Amplifier `i` implements `(1 - deltas[i]) * lambda_max`.
    pub fn varied(a: A, lambda_max: f64, deltas: &[f64], params: OpAmpParams) -> Result<Self> {
        let lambdas = deltas
            .iter()
            .map(|&d| map_eigenvalue(lambda_max, d))
            .collect::<Result<Vec<_>>>()?;
        Self::build(a, lambda_max, lambdas, params)
    }

    /// Explicit per-amplifier eigenvalues.
    pub fn with_lambdas(
        a: A,
        lambda_max: f64,
        lambdas: Vec<f64>,
        params: OpAmpParams,
    ) -> Result<Self> {
        if !(lambda_max > 0.0) {
            return Err(Error::InvalidArgument("lambda_max must be positive"));
        }
        Self::build(a, lambda_max, lambdas, params)
    }

    fn build(a: A, lambda_max: f64, lambdas: Vec<f64>, params: OpAmpParams) -> Result<Self> {
        if lambdas.len() != a.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: lambdas.len(),
            });
        }
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite);
        }
        if lambdas.iter().any(|&l| l <= 0.0) {
            return Err(Error::InvalidArgument("implemented eigenvalues must be positive"));
        }
        if !(a.min_entry() > 0.0) {
            return Err(Error::NotPositive);
        }
        let u = u_diagonal(&a.row_sums(), &lambdas)?;
        Ok(Self {
            a,
            lambda_max,
            delta: None,
            lambdas: Vector::from_vec_unchecked(lambdas),
            u: Vector::from_vec_unchecked(u),
            params,
        })
    }

    /// Same coefficients and amplifiers with a new uniform mismatch.
    pub fn with_delta(&self, delta: f64) -> Result<Self>
    where
        A: Clone,
    {
        Self::uniform(self.a.clone(), self.lambda_max, delta, self.params)
    }

    pub fn n(&self) -> usize {
        self.a.dim()
    }

    pub fn coefficients(&self) -> &A {
        &self.a
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Uniform mismatch, or `None` for per-amplifier eigenvalues.
    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn lambdas(&self) -> &Vector {
        &self.lambdas
    }

    pub fn u(&self) -> &Vector {
        &self.u
    }

    pub fn params(&self) -> &OpAmpParams {
        &self.params
    }

    /// Dense `M`; `O(N^2)` memory.
    pub fn associated_matrix(&self) -> Matrix {
        assemble_m(&self.a.to_dense(), &self.u, &self.lambdas)
    }

    /// `M` as a matrix-free operator built on the coefficient map.
    pub fn operator(&self) -> AssociatedOperator<'_, A> {
        AssociatedOperator { sys: self }
    }

    /// Spectral abscissa of `M` with the default probe settings.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        linalg::spectral_abscissa_op(&self.operator(), DEFAULT_PROBE_ALPHA, 1e-10, 50_000 * ABSCISSA_WINDOW)
    }
}

/// Dominant eigenpair of a non-negative matrix, solved tightly.
pub fn dominant(a: &Matrix) -> Result<linalg::EigPair> {
    linalg::power_iteration(a, 1e-13, 1_000_000)
}

/// Matrix-free view of `M` for an [`EigenSystem`].
#[derive(Debug, Clone, Copy)]
pub struct AssociatedOperator<'a, A> {
    sys: &'a EigenSystem<A>,
}

impl<A: SquareCoefficients> LinearMap for AssociatedOperator<'_, A> {
    fn dim(&self) -> usize {
        2 * self.sys.n()
    }

    fn apply(&self, w: &[f64], y: &mut [f64]) {
        let n = self.sys.n();
        let (x, z) = w.split_at(n);
        let (top, bottom) = y.split_at_mut(n);
        self.sys.a.apply(x, bottom);
        for i in 0..n {
            let (u, l) = (self.sys.u[i], self.sys.lambdas[i]);
            bottom[i] = u * (bottom[i] - l * x[i]) - (l * u + 0.5) * z[i];
            top[i] = 0.5 * z[i];
        }
    }

    fn norm_inf(&self) -> f64 {
        let sums = self.sys.a.row_sums();
        let diag = self.sys.a.diagonal();
        let mut best = 0.5f64;
        for i in 0..self.sys.n() {
            let (u, l) = (self.sys.u[i], self.sys.lambdas[i]);
            let off = sums[i] - diag[i];
            let row = u * (off + (diag[i] - l).abs()) + (l * u + 0.5).abs();
            best = best.max(row);
        }
        best
    }
}
