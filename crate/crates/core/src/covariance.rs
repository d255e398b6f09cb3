//! Generalized exponential correlation with a nugget.
//!
//! All distances are taken on standardized inputs. Functions here operate on
//! designs already restricted to the active covariance inputs, so `d'` below
//! is the size of that set.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

/// Per-dimension `(theta, p)` pairs and the nugget ratio `tau = eps^2 / sigma^2`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelationParams {
    pub theta: Vec<f64>,
    pub power: Vec<f64>,
    pub tau: f64,
}

impl CorrelationParams {
    pub fn new(theta: Vec<f64>, power: Vec<f64>, tau: f64) -> Result<Self> {
        let p = Self { theta, power, tau };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.len() != self.power.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta.len(),
                found: self.power.len(),
            });
        }
        if let Some(t) = self.theta.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(Error::ParameterDomain(format!("theta = {t} (need theta >= 0)")));
        }
        if let Some(p) = self.power.iter().find(|p| !(**p > 0.0 && **p <= 2.0)) {
            return Err(Error::ParameterDomain(format!("p = {p} (need 0 < p <= 2)")));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::ParameterDomain(format!("tau = {} (need tau >= 0)", self.tau)));
        }
        Ok(())
    }
}

/// Ordered, distinct input indices (0-based) of a covariance or regression set.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActiveSet(Vec<usize>);

impl ActiveSet {
    pub fn new(indices: Vec<usize>, d: usize) -> Result<Self> {
        for (k, &i) in indices.iter().enumerate() {
            if i >= d {
                return Err(Error::InvalidData(format!("active index {i} out of range for d = {d}")));
            }
            if indices[..k].contains(&i) {
                return Err(Error::InvalidData(format!("active index {i} repeated")));
            }
        }
        Ok(Self(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `theta * |h|^p`, with `ln_h = ln |h|` supplied by the caller.
#[inline]
fn decay(theta: f64, p: f64, h: f64, ln_h: f64) -> f64 {
    if h == 0.0 {
        0.0
    } else if p == 1.0 {
        theta * h
    } else if p == 2.0 {
        theta * (h * h)
    } else {
        theta * math::exp(p * ln_h)
    }
}

#[inline]
fn correlation_unchecked(x: &[f64], u: &[f64], params: &CorrelationParams) -> f64 {
    let mut s = 0.0;
    for l in 0..x.len() {
        let h = (x[l] - u[l]).abs();
        s += decay(params.theta[l], params.power[l], h, math::ln(h));
    }
    math::exp(-s)
}

fn check_dims(len: usize, params: &CorrelationParams) -> Result<()> {
    if len != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            found: len,
        });
    }
    Ok(())
}

/// `prod_l exp(-theta_l |x_l - u_l|^p_l)`.
pub fn correlation(x: &[f64], u: &[f64], params: &CorrelationParams) -> Result<f64> {
    params.validate()?;
    check_dims(x.len(), params)?;
    check_dims(u.len(), params)?;
    Ok(correlation_unchecked(x, u, params))
}

/// `R + tau I` over the rows of `design`.
pub fn build_correlation_matrix(design: &Matrix, params: &CorrelationParams) -> Result<Matrix> {
    params.validate()?;
    check_dims(design.ncols(), params)?;
    let n = design.nrows();
    let mut r = Matrix::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = 1.0 + params.tau;
        for j in 0..i {
            let v = correlation_unchecked(design.row(i), design.row(j), params);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}

/// `R(x_i, x*) + tau [x_i == x*]` for every design row; the equality test is
/// exact.
pub fn cross_correlation_vector(design: &Matrix, x: &[f64], params: &CorrelationParams) -> Result<Vec<f64>> {
    params.validate()?;
    check_dims(design.ncols(), params)?;
    check_dims(x.len(), params)?;
    Ok(cross_correlation_unchecked(design, x, params))
}

pub(crate) fn cross_correlation_unchecked(design: &Matrix, x: &[f64], params: &CorrelationParams) -> Vec<f64> {
    design
        .rows()
        .map(|row| {
            let r = correlation_unchecked(row, x, params);
            if row == x {
                r + params.tau
            } else {
                r
            }
        })
        .collect()
}

/// Pairwise absolute differences (and their logs) of a fixed design, so that
/// repeated correlation-matrix assembly inside the optimizer avoids
/// recomputing them. Results are bit-identical to
/// [`build_correlation_matrix`].
#[derive(Clone, Debug)]
pub struct DistanceCache {
    n: usize,
    d: usize,
    // pair-major, lower triangle (i > j), d entries per pair
    abs_diff: Vec<f64>,
    ln_diff: Vec<f64>,
}

impl DistanceCache {
    pub fn new(design: &Matrix) -> Self {
        let (n, d) = (design.nrows(), design.ncols());
        let pairs = n * n.saturating_sub(1) / 2;
        let mut abs_diff = Vec::with_capacity(pairs * d);
        let mut ln_diff = Vec::with_capacity(pairs * d);
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (design.row(i), design.row(j));
                for l in 0..d {
                    let h = (a[l] - b[l]).abs();
                    abs_diff.push(h);
                    ln_diff.push(math::ln(h));
                }
            }
        }
        Self {
            n,
            d,
            abs_diff,
            ln_diff,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn correlation_matrix(&self, params: &CorrelationParams) -> Result<Matrix> {
        params.validate()?;
        check_dims(self.d, params)?;
        let (n, d) = (self.n, self.d);
        let mut r = Matrix::zeros(n, n);
        let mut pos = 0;
        for i in 0..n {
            r[(i, i)] = 1.0 + params.tau;
            for j in 0..i {
                let mut s = 0.0;
                for l in 0..d {
                    s += decay(params.theta[l], params.power[l], self.abs_diff[pos + l], self.ln_diff[pos + l]);
                }
                pos += d;
                let v = math::exp(-s);
                r[(i, j)] = v;
                r[(j, i)] = v;
            }
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn params(theta: &[f64], p: &[f64], tau: f64) -> CorrelationParams {
        CorrelationParams::new(theta.to_vec(), p.to_vec(), tau).unwrap()
    }

    #[test]
    fn zero_distance_is_one() {
        let p = params(&[3.0, 0.1], &[1.5, 2.0], 0.2);
        assert_eq!(correlation(&[0.3, 0.4], &[0.3, 0.4], &p).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_unit_distance() {
        let p = params(&[1.0], &[2.0], 0.0);
        assert!((correlation(&[0.0], &[1.0], &p).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn product_of_one_dimensional_terms() {
        let p = params(&[1.0, 2.0], &[1.0, 1.0], 0.0);
        let r = correlation(&[0.5, 0.25], &[0.0, 0.0], &p).unwrap();
        assert!((r - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(CorrelationParams::new(vec![-1.0], vec![1.0], 0.0).is_err());
        assert!(CorrelationParams::new(vec![1.0], vec![0.0], 0.0).is_err());
        assert!(CorrelationParams::new(vec![1.0], vec![2.5], 0.0).is_err());
        assert!(CorrelationParams::new(vec![1.0], vec![1.0], -0.1).is_err());
        let bad = CorrelationParams {
            theta: vec![1.0],
            power: vec![3.0],
            tau: 0.0,
        };
        assert!(matches!(correlation(&[0.0], &[1.0], &bad), Err(Error::ParameterDomain(_))));
    }

    #[test]
    fn single_row_matrix() {
        let m = build_correlation_matrix(&Matrix::from_rows(&[[0.2]]).unwrap(), &params(&[1.0], &[1.0], 0.3))
            .unwrap();
        assert_eq!(m.as_slice(), &[1.3]);
    }

    #[test]
    fn duplicate_rows_give_singular_ones() {
        let m = build_correlation_matrix(
            &Matrix::from_rows(&[[0.2], [0.2]]).unwrap(),
            &params(&[1.0], &[1.0], 0.0),
        )
        .unwrap();
        assert_eq!(m.as_slice(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn large_theta_tends_to_identity() {
        let design = Matrix::from_rows(&[[0.0, 0.0], [0.5, 0.1], [1.0, 1.0]]).unwrap();
        let m = build_correlation_matrix(&design, &params(&[1e4, 1e4], &[1.0, 1.0], 0.0)).unwrap();
        assert_eq!(m, Matrix::identity(3));
    }

    #[test]
    fn cross_vector_cases() {
        let design = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let k = cross_correlation_vector(&design, &[0.5], &params(&[1.0], &[1.0], 0.0)).unwrap();
        let e = (-0.5f64).exp();
        assert!((k[0] - e).abs() < 1e-15 && (k[1] - e).abs() < 1e-15);

        let k = cross_correlation_vector(&design, &[1.0], &params(&[1.0], &[1.0], 0.25)).unwrap();
        assert_eq!(k[1], 1.25);

        let k = cross_correlation_vector(&design, &[40.0], &params(&[50.0], &[1.0], 0.0)).unwrap();
        assert!(k.iter().all(|v| *v < 1e-300));
        assert!(cross_correlation_vector(&design, &[0.0, 1.0], &params(&[1.0], &[1.0], 0.0)).is_err());
    }

    #[test]
    fn cache_matches_direct_assembly_bitwise() {
        let design = Matrix::from_rows(&[[0.1, 0.9], [0.4, 0.3], [0.7, 0.5], [0.4, 0.8]]).unwrap();
        let p = params(&[2.0, 0.3], &[1.7, 1.0], 0.01);
        let cache = DistanceCache::new(&design);
        assert_eq!(cache.correlation_matrix(&p).unwrap(), build_correlation_matrix(&design, &p).unwrap());
    }

    fn arb_params(d: usize) -> impl Strategy<Value = CorrelationParams> {
        (
            proptest::collection::vec(0.0f64..20.0, d),
            proptest::collection::vec(0.05f64..=2.0, d),
            0.0f64..0.5,
        )
            .prop_map(|(theta, power, tau)| CorrelationParams { theta, power, tau })
    }

    proptest! {
        #[test]
        fn symmetric_and_stationary(
            p in arb_params(3),
            x in proptest::collection::vec(0.0f64..1.0, 3),
            u in proptest::collection::vec(0.0f64..1.0, 3),
            shift in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let a = correlation(&x, &u, &p).unwrap();
            let b = correlation(&u, &x, &p).unwrap();
            prop_assert_eq!(a, b);
            let xs: Vec<f64> = x.iter().zip(&shift).map(|(v, s)| v + s).collect();
            let us: Vec<f64> = u.iter().zip(&shift).map(|(v, s)| v + s).collect();
            let c = correlation(&xs, &us, &p).unwrap();
            prop_assert!((a - c).abs() < 1e-12);
            prop_assert!(a > 0.0 && a <= 1.0);
        }

        #[test]
        fn monotone_decay(p in arb_params(1), h in 0.0f64..1.0, extra in 0.0f64..1.0) {
            let near = correlation(&[0.0], &[h], &p).unwrap();
            let far = correlation(&[0.0], &[h + extra], &p).unwrap();
            prop_assert!(far <= near);
        }

        #[test]
        fn matrix_entries_match_pairwise(p in arb_params(2), rows in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 2), 2..6)) {
            let design = Matrix::from_rows(&rows).unwrap();
            let m = build_correlation_matrix(&design, &p).unwrap();
            for i in 0..rows.len() {
                for j in 0..rows.len() {
                    let expect = correlation(&rows[i], &rows[j], &p).unwrap() + if i == j { p.tau } else { 0.0 };
                    prop_assert_eq!(m[(i, j)], expect);
                }
            }
        }
    }
}
