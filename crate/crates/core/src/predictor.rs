//! Conditional mean and mean squared error of the fitted process.
//!
//! With `Sigma_s = sigma^2 (R + tau I)` and `k(x)` the vector of covariances
//! between the learning sample and `x`:
//!
//! ```text
//! mean(x) = F(x) beta + k(x)^T Sigma_s^{-1} (Y_s - F_s beta)
//! mse(x)  = sigma^2 (1 + tau) - k^T Sigma_s^{-1} k + u (F_s^T Sigma_s^{-1} F_s)^{-1} u^T
//! u(x)    = F(x) - k^T Sigma_s^{-1} F_s
//! ```
//!
//! The last term accounts for `beta` being estimated. If the factorization
//! needed diagonal jitter, the jitter is treated as extra nugget everywhere
//! (prior variance and the `delta` term of `k`), so the predictor is exactly
//! the one implied by the factorized matrix.

use alloc::string::String;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::covariance::{build_correlation_matrix, cross_correlation_unchecked, ActiveSet, CorrelationParams};
use crate::data::InputTransform;
use crate::error::{Error, Result};
use crate::estimation::gls_fit;
use crate::linalg::{dot, solve_upper_transpose, Cholesky, Matrix, Qr};
use crate::math;
use crate::regression::RegressionBasis;

/// Gaussian quantile used for the 95% prediction interval.
pub const Z95: f64 = 1.96;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionResult {
    pub mean: f64,
    /// Squared output units; never negative.
    pub mse: f64,
}

impl PredictionResult {
    /// `mean -/+ 1.96 sqrt(mse)`.
    pub fn interval95(&self) -> (f64, f64) {
        let half = Z95 * math::sqrt(self.mse);
        (self.mean - half, self.mean + half)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MseKind {
    /// Includes the term for the estimated trend coefficients.
    #[default]
    Corrected,
    /// Plain kriging variance with `beta` treated as known.
    Uncorrected,
}

/// A fitted process on standardized inputs.
#[derive(Debug)]
pub struct Kriging {
    design: Matrix,
    outputs: Vec<f64>,
    active_cov: ActiveSet,
    basis: RegressionBasis,
    params: CorrelationParams,
    beta_hat: Vec<f64>,
    sigma2_hat: f64,

    cov_design: Matrix,
    chol: Cholesky,
    nugget: f64,
    alpha: Vec<f64>,
    f_white: Matrix,
    gls_r: Matrix,
    clamped: AtomicUsize,
}

impl Clone for Kriging {
    fn clone(&self) -> Self {
        Self {
            design: self.design.clone(),
            outputs: self.outputs.clone(),
            active_cov: self.active_cov.clone(),
            basis: self.basis.clone(),
            params: self.params.clone(),
            beta_hat: self.beta_hat.clone(),
            sigma2_hat: self.sigma2_hat,
            cov_design: self.cov_design.clone(),
            chol: self.chol.clone(),
            nugget: self.nugget,
            alpha: self.alpha.clone(),
            f_white: self.f_white.clone(),
            gls_r: self.gls_r.clone(),
            clamped: AtomicUsize::new(self.clamped.load(Ordering::Relaxed)),
        }
    }
}

impl Kriging {
    /// Estimates `beta` and `sigma^2` at the given correlation parameters.
    pub fn fit(
        design: Matrix,
        outputs: Vec<f64>,
        active_cov: ActiveSet,
        basis: RegressionBasis,
        params: CorrelationParams,
    ) -> Result<Self> {
        let cov_design = design.select_columns(active_cov.indices());
        let r = build_correlation_matrix(&cov_design, &params)?;
        let fit = gls_fit(&r, &basis.matrix(&design)?, &outputs)?;
        Self::from_estimates(design, outputs, active_cov, basis, params, fit.beta_hat, fit.sigma2_hat)
    }

    /// Rebuilds the factorized state from stored estimates.
    pub fn from_estimates(
        design: Matrix,
        outputs: Vec<f64>,
        active_cov: ActiveSet,
        basis: RegressionBasis,
        params: CorrelationParams,
        beta_hat: Vec<f64>,
        sigma2_hat: f64,
    ) -> Result<Self> {
        let n = design.nrows();
        if outputs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: outputs.len(),
            });
        }
        if active_cov.is_empty() {
            return Err(Error::ParameterDomain("covariance set must not be empty".into()));
        }
        ActiveSet::new(active_cov.indices().to_vec(), design.ncols())?;
        ActiveSet::new(basis.active().indices().to_vec(), design.ncols())?;
        if beta_hat.len() != basis.size() {
            return Err(Error::DimensionMismatch {
                expected: basis.size(),
                found: beta_hat.len(),
            });
        }
        if !(sigma2_hat >= 0.0 && sigma2_hat.is_finite()) {
            return Err(Error::InvalidData("sigma2_hat must be finite and non-negative".into()));
        }
        let cov_design = design.select_columns(active_cov.indices());
        let r = build_correlation_matrix(&cov_design, &params)?;
        let chol = Cholesky::factor_with_jitter(&r)?;
        let f = basis.matrix(&design)?;
        let resid: Vec<f64> = outputs.iter().zip(f.mul_vec(&beta_hat)).map(|(y, m)| y - m).collect();
        let alpha = chol.solve(&resid);
        let f_white = chol.whiten(&f);
        let gls_r = Qr::factor(&f_white)?.r();
        let nugget = params.tau + chol.jitter();
        Ok(Self {
            design,
            outputs,
            active_cov,
            basis,
            params,
            beta_hat,
            sigma2_hat,
            cov_design,
            chol,
            nugget,
            alpha,
            f_white,
            gls_r,
            clamped: AtomicUsize::new(0),
        })
    }

    pub fn predict_standardized(&self, x: &[f64], kind: MseKind) -> Result<PredictionResult> {
        if x.len() != self.design.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.design.ncols(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite query point".into()));
        }
        let xc: Vec<f64> = self.active_cov.indices().iter().map(|&i| x[i]).collect();
        let mut k = cross_correlation_unchecked(&self.cov_design, &xc, &self.params);
        if self.nugget != self.params.tau {
            let extra = self.nugget - self.params.tau;
            for (kv, row) in k.iter_mut().zip(self.cov_design.rows()) {
                if row == xc.as_slice() {
                    *kv += extra;
                }
            }
        }
        let fx = self.basis.row_unchecked(x);
        let mean = dot(&fx, &self.beta_hat) + dot(&k, &self.alpha);

        let mut w = k;
        self.chol.solve_lower_in_place(&mut w);
        let mut mse = self.sigma2_hat * (1.0 + self.nugget - dot(&w, &w));
        if kind == MseKind::Corrected {
            let u: Vec<f64> = (0..fx.len())
                .map(|j| fx[j] - (0..w.len()).map(|i| w[i] * self.f_white[(i, j)]).sum::<f64>())
                .collect();
            let z = solve_upper_transpose(&self.gls_r, &u);
            mse += self.sigma2_hat * dot(&z, &z);
        }
        if mse < 0.0 {
            self.clamped.fetch_add(1, Ordering::Relaxed);
            mse = 0.0;
        }
        Ok(PredictionResult { mean, mse })
    }

    /// Number of predictions whose MSE was clamped from a negative round-off
    /// value to zero.
    pub fn clamped_mse_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn active_cov(&self) -> &ActiveSet {
        &self.active_cov
    }

    pub fn basis(&self) -> &RegressionBasis {
        &self.basis
    }

    pub fn params(&self) -> &CorrelationParams {
        &self.params
    }

    pub fn beta_hat(&self) -> &[f64] {
        &self.beta_hat
    }

    pub fn sigma2_hat(&self) -> f64 {
        self.sigma2_hat
    }

    /// Diagonal jitter added by the factorization (0 when none was needed).
    pub fn jitter(&self) -> f64 {
        self.chol.jitter()
    }
}

/// Everything needed to rebuild a [`GpModel`]; the factorization is
/// recomputed on load.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParts {
    pub input_names: Vec<String>,
    pub transform: InputTransform,
    pub active_cov: ActiveSet,
    pub active_reg: ActiveSet,
    pub params: CorrelationParams,
    pub beta_hat: Vec<f64>,
    pub sigma2_hat: f64,
    /// Learning design after standardization.
    pub design: Matrix,
    pub outputs: Vec<f64>,
}

/// A fitted metamodel taking raw inputs.
#[derive(Clone, Debug)]
pub struct GpModel {
    input_names: Vec<String>,
    transform: InputTransform,
    kriging: Kriging,
}

impl GpModel {
    pub fn new(input_names: Vec<String>, transform: InputTransform, kriging: Kriging) -> Result<Self> {
        if transform.dim() != kriging.design().ncols() || input_names.len() != transform.dim() {
            return Err(Error::DimensionMismatch {
                expected: kriging.design().ncols(),
                found: transform.dim(),
            });
        }
        Ok(Self {
            input_names,
            transform,
            kriging,
        })
    }

    pub fn from_parts(parts: ModelParts) -> Result<Self> {
        let kriging = Kriging::from_estimates(
            parts.design,
            parts.outputs,
            parts.active_cov,
            RegressionBasis::new(parts.active_reg),
            parts.params,
            parts.beta_hat,
            parts.sigma2_hat,
        )?;
        Self::new(parts.input_names, parts.transform, kriging)
    }

    pub fn to_parts(&self) -> ModelParts {
        let k = &self.kriging;
        ModelParts {
            input_names: self.input_names.clone(),
            transform: self.transform.clone(),
            active_cov: k.active_cov.clone(),
            active_reg: k.basis.active().clone(),
            params: k.params.clone(),
            beta_hat: k.beta_hat.clone(),
            sigma2_hat: k.sigma2_hat,
            design: k.design.clone(),
            outputs: k.outputs.clone(),
        }
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn dim(&self) -> usize {
        self.transform.dim()
    }

    pub fn transform(&self) -> &InputTransform {
        &self.transform
    }

    pub fn kriging(&self) -> &Kriging {
        &self.kriging
    }

    pub fn predict(&self, x_raw: &[f64]) -> Result<PredictionResult> {
        self.predict_with(x_raw, MseKind::Corrected)
    }

    pub fn predict_with(&self, x_raw: &[f64], kind: MseKind) -> Result<PredictionResult> {
        let x = self.transform.apply(x_raw)?;
        self.kriging.predict_standardized(&x, kind)
    }

    pub fn predict_batch(&self, x_raw: &Matrix) -> Result<Vec<PredictionResult>> {
        if x_raw.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x_raw.ncols(),
            });
        }
        x_raw.rows().map(|r| self.predict(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy() -> Kriging {
        let design = Matrix::from_rows(&[[0.0], [0.3], [0.7], [1.0]]).unwrap();
        Kriging::fit(
            design,
            vec![1.0, 0.2, -0.5, 0.8],
            ActiveSet::new(vec![0], 1).unwrap(),
            RegressionBasis::new(ActiveSet::new(vec![0], 1).unwrap()),
            CorrelationParams::new(vec![3.0], vec![1.5], 0.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn interpolates_training_points() {
        let k = toy();
        for (x, y) in [0.0, 0.3, 0.7, 1.0].iter().zip(k.outputs().to_vec()) {
            let p = k.predict_standardized(&[*x], MseKind::Corrected).unwrap();
            assert!((p.mean - y).abs() < 1e-12);
            assert!(p.mse <= 1e-12 * k.sigma2_hat());
        }
    }

    #[test]
    fn far_field_limit() {
        let design = Matrix::from_rows(&[[0.0], [0.3], [0.7], [1.0]]).unwrap();
        let k = Kriging::fit(
            design,
            vec![1.0, 0.2, -0.5, 0.8],
            ActiveSet::new(vec![0], 1).unwrap(),
            RegressionBasis::intercept_only(),
            CorrelationParams::new(vec![100.0], vec![1.0], 0.05).unwrap(),
        )
        .unwrap();
        // correlation exp(-100 * 9) underflows to zero
        let p = k.predict_standardized(&[10.0], MseKind::Corrected).unwrap();
        assert_eq!(p.mean, k.beta_hat()[0]);
        let g = k.gls_r[(0, 0)];
        let expect = k.sigma2_hat() * (1.05 + 1.0 / (g * g));
        assert!((p.mse - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn correction_never_decreases_mse() {
        let k = toy();
        for x in [0.1, 0.5, 0.85, 1.4] {
            let c = k.predict_standardized(&[x], MseKind::Corrected).unwrap();
            let u = k.predict_standardized(&[x], MseKind::Uncorrected).unwrap();
            assert!(c.mse >= u.mse);
            assert!(u.mse <= k.sigma2_hat() * (1.0 + k.params().tau) + 1e-15);
            assert_eq!(c.mean, u.mean);
        }
    }

    #[test]
    fn interval_is_symmetric() {
        let p = PredictionResult { mean: 2.0, mse: 4.0 };
        assert_eq!(p.interval95(), (2.0 - 3.92, 2.0 + 3.92));
    }

    #[test]
    fn parts_round_trip() {
        let k = toy();
        let model = GpModel::new(
            vec!["a".into()],
            InputTransform::fit_empirical(
                &crate::data::TrainingSet::with_default_names(k.design().clone(), k.outputs().to_vec())
                    .unwrap(),
            )
            .unwrap(),
            k,
        )
        .unwrap();
        let again = GpModel::from_parts(model.to_parts()).unwrap();
        for x in [0.05, 0.5, 0.95] {
            assert_eq!(model.predict(&[x]).unwrap(), again.predict(&[x]).unwrap());
        }
        assert!(model.predict(&[0.1, 0.2]).is_err());
    }
}
