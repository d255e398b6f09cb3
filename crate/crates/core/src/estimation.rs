//! Profile maximum likelihood.
//!
//! For fixed correlation parameters the trend coefficients and process
//! variance have closed forms (generalized least squares and the ML variance);
//! substituting them leaves the objective
//!
//! ```text
//! psi(theta, p, tau) = det(R + tau I)^(1/n) * sigma2_hat
//! ```
//!
//! to be minimized numerically. Every solve goes through one Cholesky factor
//! of `R + tau I`; no matrix is ever inverted explicitly.

use alloc::vec::Vec;
use core::cell::Cell;
use core::f64::consts::PI;

use crate::covariance::{build_correlation_matrix, ActiveSet, CorrelationParams, DistanceCache};
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix, Qr};
use crate::math;
use crate::regression::RegressionBasis;

/// Closed-form estimates at fixed `(theta, p, tau)`.
#[derive(Clone, Debug)]
pub struct ProfileFit {
    pub beta_hat: Vec<f64>,
    pub sigma2_hat: f64,
    /// `ln det(R + tau I)`, including any jitter the factorization needed.
    pub log_det: f64,
    pub psi: f64,
    chol: Cholesky,
    // R factor of L^{-1} F; R^T R = F^T (R + tau I)^{-1} F
    gls_r: Matrix,
}

impl ProfileFit {
    pub fn n(&self) -> usize {
        self.chol.dim()
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// Upper-triangular `G` with `G^T G = F^T (R + tau I)^{-1} F`.
    pub fn gls_factor(&self) -> &Matrix {
        &self.gls_r
    }

    pub fn log_likelihood(&self) -> Result<f64> {
        log_likelihood(self.sigma2_hat, self.n(), self.log_det)
    }
}

/// Generalized least squares for `beta` and the ML estimate of `sigma^2`.
pub fn gls_fit(r_plus: &Matrix, f: &Matrix, y: &[f64]) -> Result<ProfileFit> {
    let n = r_plus.nrows();
    if f.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: f.nrows(),
        });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    let chol = Cholesky::factor_with_jitter(r_plus)?;
    let f_white = chol.whiten(f);
    let mut y_white = y.to_vec();
    chol.solve_lower_in_place(&mut y_white);

    let qr = Qr::factor(&f_white)?;
    let beta_hat = qr.solve_least_squares(&y_white);
    let fitted = f_white.mul_vec(&beta_hat);
    let rss: f64 = y_white.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    let sigma2_hat = rss / n as f64;
    let log_det = chol.log_det();
    let psi = math::exp(log_det / n as f64) * sigma2_hat;
    Ok(ProfileFit {
        beta_hat,
        sigma2_hat,
        log_det,
        psi,
        gls_r: qr.r(),
        chol,
    })
}

/// Profiled Gaussian log-likelihood
/// `-(n/2) ln(2 pi) - (n/2) ln(sigma2) - (1/2) ln det(R + tau I) - n/2`;
/// the quadratic form equals `n / 2` at the ML variance.
pub fn log_likelihood(sigma2_hat: f64, n: usize, log_det: f64) -> Result<f64> {
    if !(sigma2_hat > 0.0) {
        return Err(Error::DegenerateFit);
    }
    let n = n as f64;
    Ok(-0.5 * n * math::ln(2.0 * PI) - 0.5 * n * math::ln(sigma2_hat) - 0.5 * log_det - 0.5 * n)
}

/// Corrected Akaike criterion with `m1` regression and `m2` covariance inputs.
pub fn aicc(log_lik: f64, n: usize, m1: usize, m2: usize) -> Result<f64> {
    let denom = n as i64 - m1 as i64 - m2 as i64 - 2;
    if denom <= 0 {
        return Err(Error::SampleTooSmall { n, m1, m2 });
    }
    let (n, k) = (n as f64, (m1 + m2 + 1) as f64);
    Ok(-2.0 * log_lik + 2.0 * n * k / denom as f64)
}

/// A fixed learning sample restricted to one covariance set and one
/// regression basis; evaluates the profile fit at any correlation parameters.
#[derive(Clone, Debug)]
pub struct ProfileProblem {
    cache: DistanceCache,
    basis: Matrix,
    y: Vec<f64>,
}

impl ProfileProblem {
    /// `cov_design` holds the active covariance columns only; `basis` is the
    /// regression matrix `F_s`.
    pub fn new(cov_design: &Matrix, basis: Matrix, y: Vec<f64>) -> Result<Self> {
        let n = cov_design.nrows();
        if cov_design.ncols() == 0 {
            return Err(Error::ParameterDomain("covariance set must not be empty".into()));
        }
        if basis.nrows() != n || y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if basis.nrows() != n { basis.nrows() } else { y.len() },
            });
        }
        // rank of F_s is invariant under whitening; check it once here
        Qr::factor(&basis)?;
        Ok(Self {
            cache: DistanceCache::new(cov_design),
            basis,
            y,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn cov_dim(&self) -> usize {
        self.cache.dim()
    }

    pub fn fit(&self, params: &CorrelationParams) -> Result<ProfileFit> {
        let r = self.cache.correlation_matrix(params)?;
        gls_fit(&r, &self.basis, &self.y)
    }

    pub fn psi(&self, params: &CorrelationParams) -> Result<f64> {
        self.fit(params).map(|f| f.psi)
    }
}

/// `psi` for the covariance set `active_cov` and regression `basis` over a
/// standardized design.
pub fn psi_objective(
    params: &CorrelationParams,
    active_cov: &ActiveSet,
    basis: &RegressionBasis,
    design: &Matrix,
    y: &[f64],
) -> Result<f64> {
    if active_cov.is_empty() {
        return Err(Error::ParameterDomain("covariance set must not be empty".into()));
    }
    let cov_design = design.select_columns(active_cov.indices());
    let r = build_correlation_matrix(&cov_design, params)?;
    gls_fit(&r, &basis.matrix(design)?, y).map(|f| f.psi)
}

/// Multiplier applied to the best objective seen when a point cannot be
/// evaluated.
pub const FAILURE_PENALTY: f64 = 1e6;

/// Optimizer view of `psi`: failures become `FAILURE_PENALTY` times the best
/// value seen so far (1 before any success), so the search never sees a
/// non-finite value.
pub struct PenalizedPsi<'a> {
    problem: &'a ProfileProblem,
    best: Cell<Option<f64>>,
    failures: Cell<usize>,
}

impl<'a> PenalizedPsi<'a> {
    pub fn new(problem: &'a ProfileProblem) -> Self {
        Self {
            problem,
            best: Cell::new(None),
            failures: Cell::new(0),
        }
    }

    pub fn eval(&self, params: &CorrelationParams) -> f64 {
        match self.problem.psi(params) {
            Ok(v) if v.is_finite() => {
                if self.best.get().map_or(true, |b| v < b) {
                    self.best.set(Some(v));
                }
                v
            }
            _ => {
                self.failures.set(self.failures.get() + 1);
                FAILURE_PENALTY * self.best.get().unwrap_or(1.0)
            }
        }
    }

    pub fn failures(&self) -> usize {
        self.failures.get()
    }
}

/// `F^T (R + tau I)^{-1} (Y - F beta)`; zero at the GLS solution.
pub fn gls_normal_residual(fit: &ProfileFit, f: &Matrix, y: &[f64]) -> Vec<f64> {
    let resid: Vec<f64> = y
        .iter()
        .zip(f.mul_vec(&fit.beta_hat))
        .map(|(a, b)| a - b)
        .collect();
    let w = fit.cholesky().solve(&resid);
    (0..f.ncols()).map(|j| dot(&f.column(j), &w)).collect()
}
