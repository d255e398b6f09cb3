//! One-degree polynomial trend `F(x) = (1, x_i1, ..., x_im)` over the active
//! regression inputs.

use alloc::vec::Vec;

use crate::covariance::ActiveSet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegressionBasis {
    active: ActiveSet,
}

impl RegressionBasis {
    pub fn new(active: ActiveSet) -> Self {
        Self { active }
    }

    pub fn intercept_only() -> Self {
        Self::default()
    }

    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    /// Number of basis functions, intercept included.
    pub fn size(&self) -> usize {
        self.active.len() + 1
    }

    pub fn row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if let Some(&i) = self.active.indices().iter().find(|&&i| i >= x.len()) {
            return Err(Error::DimensionMismatch {
                expected: i + 1,
                found: x.len(),
            });
        }
        Ok(self.row_unchecked(x))
    }

    pub(crate) fn row_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.size());
        out.push(1.0);
        out.extend(self.active.indices().iter().map(|&i| x[i]));
        out
    }

    pub fn matrix(&self, x: &Matrix) -> Result<Matrix> {
        let mut m = Matrix::zeros(x.nrows(), self.size());
        for (i, row) in x.rows().enumerate() {
            m.row_mut(i).copy_from_slice(&self.row(row)?);
        }
        Ok(m)
    }
}

/// `F(x)` for one point.
pub fn basis_row(x: &[f64], basis: &RegressionBasis) -> Result<Vec<f64>> {
    basis.row(x)
}

/// Stacks [`basis_row`] over the rows of `x`.
pub fn basis_matrix(x: &Matrix, basis: &RegressionBasis) -> Result<Matrix> {
    basis.matrix(x)
}
